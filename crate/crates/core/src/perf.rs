//! Discounted reward operators and the constrained Bellman operator on the
//! game induced by a robust invariant set.

use crate::error::{Error, Result};
use crate::fixed_point::{fixed_point, per_state, sweep, FixedPoint, Operator, SolverSettings};
use crate::game::{GameSpec, MixedPolicy};
use crate::matrix_game::solve_block;
use crate::qtable::{Perf, PerfQ, SafetyQ};
use crate::safety::InvariantSet;

/// `T^{π,μ}`: both players stochastic and fixed.
pub struct PairPerfOp<'a> {
    pub spec: &'a GameSpec,
    pub pi: &'a MixedPolicy,
    pub mu: &'a MixedPolicy,
}

impl Operator<Perf> for PairPerfOp<'_> {
    fn apply(&self, q: &PerfQ) -> PerfQ {
        let cont = per_state(self.spec, |x| {
            let mut acc = 0.0;
            for (u, &pu) in self.pi.row(x).iter().enumerate() {
                if pu == 0.0 {
                    continue;
                }
                let inner: f64 = q
                    .row(x, u)
                    .iter()
                    .zip(self.mu.row(x))
                    .map(|(v, pa)| v * pa)
                    .sum();
                acc += pu * inner;
            }
            acc
        });
        reward_backup(self.spec, &cont)
    }

    fn rate(&self) -> f64 {
        self.spec.gamma
    }
}

/// `T^π`: protagonist fixed, adversary minimizing per protagonist action.
pub struct PolicyPerfOp<'a> {
    pub spec: &'a GameSpec,
    pub pi: &'a MixedPolicy,
}

impl Operator<Perf> for PolicyPerfOp<'_> {
    fn apply(&self, q: &PerfQ) -> PerfQ {
        let cont = per_state(self.spec, |x| policy_value_at(q, self.pi, x));
        reward_backup(self.spec, &cont)
    }

    fn rate(&self) -> f64 {
        self.spec.gamma
    }
}

fn policy_value_at(q: &PerfQ, pi: &MixedPolicy, x: usize) -> f64 {
    pi.row(x)
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(u, &p)| p * q.worst_case(x, u))
        .sum()
}

fn reward_backup(spec: &GameSpec, cont: &[f64]) -> PerfQ {
    let g = spec.gamma;
    sweep(spec, |cell| spec.reward[cell] + g * cont[spec.transition[cell]])
}

pub fn apply_t_pimu(q: &PerfQ, spec: &GameSpec, pi: &MixedPolicy, mu: &MixedPolicy) -> PerfQ {
    PairPerfOp { spec, pi, mu }.apply(q)
}

pub fn apply_t_pi(q: &PerfQ, spec: &GameSpec, pi: &MixedPolicy) -> PerfQ {
    PolicyPerfOp { spec, pi }.apply(q)
}

/// Matrix-game value of member state `x` over its admissible rows.
pub fn restricted_value(q: &PerfQ, inv: &InvariantSet, x: usize) -> Result<f64> {
    let sol = solve_block(q.state_block(x), q.n_u(), q.n_a(), inv.admissible(x))?;
    Ok(sol.value)
}

/// The constrained Bellman operator on the induced game.
///
/// Rows of member states under admissible actions are backed up through the
/// restricted matrix game at the successor; all other rows are copied
/// unchanged. A member row whose successor is not a member fails with
/// [`Error::NonMemberSuccessor`].
pub fn apply_t_constrained(q: &PerfQ, spec: &GameSpec, inv: &InvariantSet) -> Result<PerfQ> {
    if inv.is_empty() {
        return Err(Error::InvalidConfig("invariant set is empty".into()));
    }
    let mut values = vec![f64::NAN; spec.n_states];
    for x in inv.members() {
        values[x] = restricted_value(q, inv, x)?;
    }
    let mut out = q.clone();
    for x in inv.members() {
        for &u in inv.admissible(x) {
            for a in 0..spec.n_a {
                let next = spec.next(x, u, a);
                if !inv.is_member(next) {
                    return Err(Error::NonMemberSuccessor {
                        state: x,
                        prot: u,
                        adv: a,
                        next,
                    });
                }
                out.set(x, u, a, spec.reward(x, u, a) + spec.gamma * values[next]);
            }
        }
    }
    Ok(out)
}

/// Fixed point of [`apply_t_constrained`] from `q0`.
pub fn constrained_fixed_point(
    spec: &GameSpec,
    inv: &InvariantSet,
    q0: PerfQ,
    settings: SolverSettings,
) -> Result<FixedPoint<Perf>> {
    if !(settings.tol > 0.0) {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    let mut q = q0;
    let mut residual = f64::INFINITY;
    for iter in 1..=settings.max_iter {
        let next = apply_t_constrained(&q, spec, inv)?;
        residual = next.sup_dist(&q);
        q = next;
        if residual <= settings.tol {
            return Ok(FixedPoint {
                q,
                residual,
                iters: iter,
                error_bound: spec.gamma * residual / (1.0 - spec.gamma),
            });
        }
    }
    Err(Error::MaxIterExceeded {
        residual,
        tol: settings.tol,
        iters: settings.max_iter,
    })
}

/// `max |T(q) - q|` over member states and their admissible actions.
pub fn constrained_residual(q: &PerfQ, spec: &GameSpec, inv: &InvariantSet) -> Result<f64> {
    let next = apply_t_constrained(q, spec, inv)?;
    let mut worst = 0.0_f64;
    for x in inv.members() {
        for &u in inv.admissible(x) {
            for a in 0..spec.n_a {
                worst = worst.max((next.get(x, u, a) - q.get(x, u, a)).abs());
            }
        }
    }
    Ok(worst)
}

/// Solves for `Q^π`, warm-started from `warm` when given.
pub fn task_policy_eval(
    spec: &GameSpec,
    pi: &MixedPolicy,
    settings: SolverSettings,
    warm: Option<&PerfQ>,
) -> Result<FixedPoint<Perf>> {
    let q0 = warm.cloned().unwrap_or_else(|| PerfQ::zeros(spec));
    fixed_point(&PolicyPerfOp { spec, pi }, q0, settings)
}

/// `V^π(x) = Σ_u π(u|x) min_a Q^π(x, u, a)`.
pub fn state_values(q: &PerfQ, pi: &MixedPolicy) -> Vec<f64> {
    (0..q.n_states()).map(|x| policy_value_at(q, pi, x)).collect()
}

/// `V_h(x) = max_u min_a Q_h(x, u, a)`.
pub fn safety_state_values(q_h: &SafetyQ) -> Vec<f64> {
    q_h.max_min_values()
}

/// Per-state terms of the twofold objective: reward value inside the set,
/// safety value outside it. Both are reported; the selected term is `objective`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwofoldValues {
    pub v: Vec<f64>,
    pub v_h: Vec<f64>,
    pub objective: Vec<f64>,
}

pub fn twofold_values(q: &PerfQ, pi: &MixedPolicy, q_h: &SafetyQ, inv: &InvariantSet) -> TwofoldValues {
    let v = state_values(q, pi);
    let v_h = safety_state_values(q_h);
    let objective = (0..v.len())
        .map(|x| if inv.is_member(x) { v[x] } else { v_h[x] })
        .collect();
    TwofoldValues { v, v_h, objective }
}
