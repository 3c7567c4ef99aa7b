//! Independent verifiers.
//!
//! Nothing here calls the operator code in `safety` or `perf`: values are
//! recomputed from the game tables, from deterministic rollouts, or by
//! exhaustive enumeration. The one shared solver is the matrix-game LP,
//! which the induced-game check uses for its per-state values.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fixed_point::{Operator, SolverSettings};
use crate::game::{rollout_det, DetPolicy, GameSpec, MixedPolicy, Role};
use crate::matrix_game::solve_block;
use crate::perf::{PairPerfOp, PolicyPerfOp};
use crate::qtable::{PerfQ, QTable, SafetyQ};
use crate::safety::{InvariantSet, PairSafetyOp, PolicySafetyOp, SafetyBellmanOp};

/// Largest number of deterministic policy pairs [`minimax_safety_enum`] will visit.
pub const ENUM_BUDGET: f64 = 1e7;

/// `min_t h(x_t)` along the deterministic trajectory from `(x0, u0, a0)`.
pub fn undiscounted_traj_value(
    spec: &GameSpec,
    x0: usize,
    u0: usize,
    a0: usize,
    pi_h: &DetPolicy,
    mu_h: &DetPolicy,
) -> f64 {
    rollout_det(spec, x0, u0, a0, pi_h, mu_h)
        .states
        .iter()
        .map(|&x| spec.h(x))
        .fold(f64::INFINITY, f64::min)
}

/// `|U|^|X| * |A|^|X|`.
pub fn enumeration_pairs(spec: &GameSpec) -> f64 {
    (spec.n_u as f64).powi(spec.n_states as i32) * (spec.n_a as f64).powi(spec.n_states as i32)
}

fn decode(mut index: usize, radix: usize, len: usize) -> Vec<usize> {
    let mut digits = vec![0; len];
    for d in digits.iter_mut() {
        *d = index % radix;
        index /= radix;
    }
    digits
}

/// Exact undiscounted `Q_h^*` by enumerating every deterministic protagonist
/// policy against every deterministic adversary policy.
pub fn minimax_safety_enum(spec: &GameSpec, budget: f64) -> Result<SafetyQ> {
    let pairs = enumeration_pairs(spec);
    if pairs > budget {
        return Err(Error::BudgetExceeded { pairs, budget });
    }
    let nx = spec.n_states;
    let n_pi = spec.n_u.pow(nx as u32);
    let n_mu = spec.n_a.pow(nx as u32);
    let adversaries: Vec<DetPolicy> = (0..n_mu)
        .map(|j| DetPolicy::from_actions_unchecked(Role::Adversary, decode(j, spec.n_a, nx)))
        .collect();
    let cells = spec.n_cells();

    let best = (0..n_pi)
        .into_par_iter()
        .fold(
            || vec![f64::NEG_INFINITY; cells],
            |mut best, i| {
                let pi = DetPolicy::from_actions_unchecked(Role::Protagonist, decode(i, spec.n_u, nx));
                let mut worst = vec![f64::INFINITY; cells];
                for mu in &adversaries {
                    for x in 0..nx {
                        for u in 0..spec.n_u {
                            for a in 0..spec.n_a {
                                let c = spec.cell(x, u, a);
                                let v = undiscounted_traj_value(spec, x, u, a, &pi, mu);
                                worst[c] = worst[c].min(v);
                            }
                        }
                    }
                }
                for (b, w) in best.iter_mut().zip(worst) {
                    *b = b.max(w);
                }
                best
            },
        )
        .reduce(
            || vec![f64::NEG_INFINITY; cells],
            |a, b| a.into_iter().zip(b).map(|(x, y)| x.max(y)).collect(),
        );
    Ok(QTable::from_values(nx, spec.n_u, spec.n_a, best))
}

/// Exact undiscounted `Q_h^*` by solving one safety game per constraint level.
///
/// For each level `c`, the greatest set `W_c ⊆ {h >= c}` in which the
/// protagonist has an action keeping every adversary reply inside `W_c` is
/// found by repeatedly discarding states without such an action. The state
/// value is the largest level whose set contains the state, and
/// `Q(x, u, a) = min{h(x), V(f(x, u, a))}`. Polynomial in the game size.
pub fn safety_game_values(spec: &GameSpec) -> SafetyQ {
    let nx = spec.n_states;
    let mut levels = spec.constraint.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut value = vec![f64::NEG_INFINITY; nx];
    for &c in &levels {
        let mut inside: Vec<bool> = (0..nx).map(|x| spec.h(x) >= c).collect();
        loop {
            let mut changed = false;
            for x in 0..nx {
                if !inside[x] {
                    continue;
                }
                let holds = (0..spec.n_u)
                    .any(|u| (0..spec.n_a).all(|a| inside[spec.next(x, u, a)]));
                if !holds {
                    inside[x] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for x in 0..nx {
            if inside[x] {
                value[x] = c;
            }
        }
    }
    let per_x = spec.n_u * spec.n_a;
    SafetyQ::from_fn(spec, |cell| spec.h(cell / per_x).min(value[spec.transition[cell]]))
}

/// Discounted safety fixed points at several `γ_h`, computed by state-value
/// iteration `V(y) = max_u min_a [(1-γ_h) h(y) + γ_h min{h(y), V(f(y,u,a))}]`.
pub fn discounted_sweep(
    spec: &GameSpec,
    gammas: &[f64],
    settings: SolverSettings,
) -> Result<Vec<(f64, SafetyQ)>> {
    gammas
        .iter()
        .map(|&g| {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::InvalidConfig(format!("gamma_h {g} outside (0, 1)")));
            }
            let v = discounted_state_values(spec, g, settings)?;
            let per_x = spec.n_u * spec.n_a;
            let q = SafetyQ::from_fn(spec, |cell| {
                let h = spec.h(cell / per_x);
                (1.0 - g) * h + g * h.min(v[spec.transition[cell]])
            });
            Ok((g, q))
        })
        .collect()
}

fn discounted_state_values(spec: &GameSpec, g: f64, settings: SolverSettings) -> Result<Vec<f64>> {
    let mut v = spec.constraint.clone();
    let mut change = f64::INFINITY;
    for _ in 0..settings.max_iter {
        let next: Vec<f64> = (0..spec.n_states)
            .map(|y| {
                let h = spec.h(y);
                let mut best = f64::NEG_INFINITY;
                for u in 0..spec.n_u {
                    let mut worst = f64::INFINITY;
                    for a in 0..spec.n_a {
                        let backed = (1.0 - g) * h + g * h.min(v[spec.next(y, u, a)]);
                        worst = worst.min(backed);
                    }
                    best = best.max(worst);
                }
                best
            })
            .collect();
        change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if change <= settings.tol {
            return Ok(v);
        }
    }
    Err(Error::MaxIterExceeded {
        residual: change,
        tol: settings.tol,
        iters: settings.max_iter,
    })
}

/// The game restricted to member states and admissible protagonist actions,
/// with states renumbered densely.
#[derive(Debug, Clone)]
pub struct InducedGame {
    /// Original index of each local state.
    pub states: Vec<usize>,
    /// Original protagonist actions available at each local state.
    pub actions: Vec<Vec<usize>>,
    /// `successor[s][k * n_a + a]` in local indices.
    pub successor: Vec<Vec<usize>>,
    pub reward: Vec<Vec<f64>>,
    pub n_a: usize,
    pub gamma: f64,
}

impl InducedGame {
    pub fn build(spec: &GameSpec, inv: &InvariantSet) -> Result<Self> {
        let states: Vec<usize> = inv.members().collect();
        let mut local = vec![usize::MAX; spec.n_states];
        for (s, &x) in states.iter().enumerate() {
            local[x] = s;
        }
        let mut actions = Vec::new();
        let mut successor = Vec::new();
        let mut reward = Vec::new();
        for &x in &states {
            let acts = inv.admissible(x).to_vec();
            let mut succ = Vec::with_capacity(acts.len() * spec.n_a);
            let mut rew = Vec::with_capacity(acts.len() * spec.n_a);
            for &u in &acts {
                for a in 0..spec.n_a {
                    let y = spec.next(x, u, a);
                    if local[y] == usize::MAX {
                        return Err(Error::NonMemberSuccessor {
                            state: x,
                            prot: u,
                            adv: a,
                            next: y,
                        });
                    }
                    succ.push(local[y]);
                    rew.push(spec.reward(x, u, a));
                }
            }
            actions.push(acts);
            successor.push(succ);
            reward.push(rew);
        }
        Ok(InducedGame {
            states,
            actions,
            successor,
            reward,
            n_a: spec.n_a,
            gamma: spec.gamma,
        })
    }

    /// Shapley iteration on state values: `V(s) = val[r + γ V(succ)]`.
    pub fn solve_values(&self, settings: SolverSettings) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.states.len()];
        let mut change = f64::INFINITY;
        for _ in 0..settings.max_iter {
            let mut next = Vec::with_capacity(v.len());
            for s in 0..self.states.len() {
                let k = self.actions[s].len();
                let payoff: Vec<f64> = (0..k * self.n_a)
                    .map(|i| self.reward[s][i] + self.gamma * v[self.successor[s][i]])
                    .collect();
                let rows: Vec<usize> = (0..k).collect();
                next.push(solve_block(&payoff, k, self.n_a, &rows)?.value);
            }
            change = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            v = next;
            if change <= settings.tol {
                return Ok(v);
            }
        }
        Err(Error::MaxIterExceeded {
            residual: change,
            tol: settings.tol,
            iters: settings.max_iter,
        })
    }
}

/// Optimal action values of the induced game, mapped back onto the full
/// table. Cells off the induced game are zero.
pub fn induced_game_solve(spec: &GameSpec, inv: &InvariantSet, settings: SolverSettings) -> Result<PerfQ> {
    let game = InducedGame::build(spec, inv)?;
    let v = game.solve_values(settings)?;
    let mut q = PerfQ::zeros(spec);
    for (s, &x) in game.states.iter().enumerate() {
        for (k, &u) in game.actions[s].iter().enumerate() {
            for a in 0..spec.n_a {
                let i = k * spec.n_a + a;
                q.set(x, u, a, game.reward[s][i] + game.gamma * v[game.successor[s][i]]);
            }
        }
    }
    Ok(q)
}

/// Largest gap between two tables over the cells of the induced game.
pub fn induced_sup_dist(a: &PerfQ, b: &PerfQ, inv: &InvariantSet) -> f64 {
    let mut worst = 0.0_f64;
    for x in inv.members() {
        for &u in inv.admissible(x) {
            for k in 0..a.n_a() {
                worst = worst.max((a.get(x, u, k) - b.get(x, u, k)).abs());
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InvarianceReport {
    pub explored: usize,
    /// `(state, protagonist action, adversary action, successor)` leaving the set.
    pub exits: Vec<(usize, usize, usize, usize)>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.exits.is_empty()
    }
}

/// Breadth-first search from every member state over every admissible
/// protagonist action and every adversary action, recording any transition
/// that leaves the member set.
pub fn forward_invariance_search(spec: &GameSpec, inv: &InvariantSet) -> InvarianceReport {
    let mut report = InvarianceReport::default();
    let mut seen = vec![usize::MAX; spec.n_states];
    for start in inv.members() {
        let mut queue = VecDeque::from([start]);
        seen[start] = start;
        while let Some(x) = queue.pop_front() {
            for &u in inv.admissible(x) {
                for a in 0..spec.n_a {
                    let y = spec.next(x, u, a);
                    report.explored += 1;
                    if !inv.is_member(y) {
                        if !report.exits.contains(&(x, u, a, y)) {
                            report.exits.push((x, u, a, y));
                        }
                        continue;
                    }
                    if seen[y] != start {
                        seen[y] = start;
                        queue.push_back(y);
                    }
                }
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignReport {
    pub classified: usize,
    pub skipped: usize,
    /// States where membership disagrees with the exact sign.
    pub mismatches: Vec<usize>,
}

impl SignReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares membership (ambiguous states skipped) with `max_u min_a exact >= threshold`.
pub fn sign_certification(inv: &InvariantSet, exact: &SafetyQ) -> SignReport {
    let mut report = SignReport::default();
    for x in 0..inv.n_states() {
        if inv.is_ambiguous(x) {
            report.skipped += 1;
            continue;
        }
        report.classified += 1;
        if inv.is_member(x) != (exact.max_min(x).0 >= inv.threshold()) {
            report.mismatches.push(x);
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropertyReport {
    pub pairs: usize,
    /// Violations per operator, in the order pair, policy, Bellman safety,
    /// then pair and policy performance.
    pub contraction_violations: [usize; 5],
    pub monotonicity_violations: [usize; 5],
    /// Largest observed `||T q - T q~|| / ||q - q~||` per operator.
    pub worst_ratio: [f64; 5],
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.contraction_violations.iter().all(|&v| v == 0)
            && self.monotonicity_violations.iter().all(|&v| v == 0)
    }
}

pub const OPERATOR_NAMES: [&str; 5] = ["T_h^{pi,mu}", "T_h^pi", "T_h", "T^{pi,mu}", "T^pi"];

fn random_mixed(rng: &mut ChaCha8Rng, n_states: usize, n_actions: usize) -> MixedPolicy {
    let rows = (0..n_states)
        .map(|_| {
            let w: Vec<f64> = (0..n_actions).map(|_| rng.random::<f64>() + 1e-3).collect();
            let t: f64 = w.iter().sum();
            w.into_iter().map(|v| v / t).collect::<Vec<_>>()
        })
        .map(|mut row: Vec<f64>| {
            // absorb rounding so the row sums to 1 within 1e-12
            let s: f64 = row.iter().sum();
            row[0] += 1.0 - s;
            row
        })
        .collect();
    MixedPolicy::from_rows(rows).expect("normalized rows")
}

fn random_table<K>(rng: &mut ChaCha8Rng, spec: &GameSpec, scale: f64) -> QTable<K> {
    QTable::from_fn(spec, |_| rng.random_range(-scale..scale))
}

/// Checks contraction and monotonicity of all five operators on `pairs`
/// random table pairs, with fresh random policies for every pair.
pub fn operator_property_sweep(spec: &GameSpec, pairs: usize, seed: u64) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PropertyReport {
        pairs,
        ..Default::default()
    };
    for _ in 0..pairs {
        let pi_h = DetPolicy::from_actions_unchecked(
            Role::Protagonist,
            (0..spec.n_states).map(|_| rng.random_range(0..spec.n_u)).collect(),
        );
        let mu_h = DetPolicy::from_actions_unchecked(
            Role::Adversary,
            (0..spec.n_states).map(|_| rng.random_range(0..spec.n_a)).collect(),
        );
        let pi = random_mixed(&mut rng, spec.n_states, spec.n_u);
        let mu = random_mixed(&mut rng, spec.n_states, spec.n_a);
        let scale = 10.0_f64.powf(rng.random_range(-1.0..1.5));

        let qs: SafetyQ = random_table(&mut rng, spec, scale);
        let qs2: SafetyQ = random_table(&mut rng, spec, scale);
        let lower_s = SafetyQ::from_fn(spec, |c| qs.values()[c] - rng.random_range(0.0..scale));
        let qp: PerfQ = random_table(&mut rng, spec, scale);
        let qp2: PerfQ = random_table(&mut rng, spec, scale);
        let lower_p = PerfQ::from_fn(spec, |c| qp.values()[c] - rng.random_range(0.0..scale));

        let safety_ops: [&dyn Operator<crate::qtable::Safety>; 3] = [
            &PairSafetyOp { spec, pi_h: &pi_h, mu_h: &mu_h },
            &PolicySafetyOp { spec, pi_h: &pi_h },
            &SafetyBellmanOp { spec },
        ];
        for (i, op) in safety_ops.iter().enumerate() {
            check_pair(&mut report, i, *op, &qs, &qs2, &lower_s);
        }
        let perf_ops: [&dyn Operator<crate::qtable::Perf>; 2] = [
            &PairPerfOp { spec, pi: &pi, mu: &mu },
            &PolicyPerfOp { spec, pi: &pi },
        ];
        for (i, op) in perf_ops.iter().enumerate() {
            check_pair(&mut report, 3 + i, *op, &qp, &qp2, &lower_p);
        }
    }
    report
}

fn check_pair<K>(
    report: &mut PropertyReport,
    i: usize,
    op: &dyn Operator<K>,
    q: &QTable<K>,
    q2: &QTable<K>,
    lower: &QTable<K>,
) {
    let before = q.sup_dist(q2);
    let after = op.apply(q).sup_dist(&op.apply(q2));
    // rounding slack only: a few ulps of the table magnitude
    let mag = q.values().iter().chain(q2.values()).fold(0.0_f64, |m, v| m.max(v.abs()));
    if after > op.rate() * before + 8.0 * f64::EPSILON * (1.0 + mag) {
        report.contraction_violations[i] += 1;
    }
    if before > 0.0 {
        report.worst_ratio[i] = report.worst_ratio[i].max(after / before);
    }
    if op.apply(q).min_gap(&op.apply(lower)) < 0.0 {
        report.monotonicity_violations[i] += 1;
    }
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
fn linear_solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}

fn subsets(n: usize) -> Vec<Vec<usize>> {
    (1..1usize << n)
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
        .collect()
}

/// Matrix-game value by equal-size support enumeration.
///
/// For every pair of row and column supports of equal size, solves both
/// indifference systems and returns the first pair that is a verified
/// equilibrium as `(value, row strategy)`. Exact for nondegenerate games.
pub fn support_enumeration(a: &[Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    let (m, n) = (a.len(), a[0].len());
    let tol = 1e-9;
    for rows in subsets(m) {
        for cols in subsets(n).into_iter().filter(|c| c.len() == rows.len()) {
            let k = rows.len();
            // unknowns p_rows..., v : for each j in cols, sum_i p_i a_ij - v = 0; sum p = 1
            let mut mat = Vec::new();
            let mut rhs = Vec::new();
            for &j in &cols {
                let mut row: Vec<f64> = rows.iter().map(|&i| a[i][j]).collect();
                row.push(-1.0);
                mat.push(row);
                rhs.push(0.0);
            }
            let mut sum = vec![1.0; k];
            sum.push(0.0);
            mat.push(sum);
            rhs.push(1.0);
            let Some(sol_p) = linear_solve(mat, rhs) else { continue };
            let mut mat = Vec::new();
            let mut rhs = Vec::new();
            for &i in &rows {
                let mut row: Vec<f64> = cols.iter().map(|&j| a[i][j]).collect();
                row.push(-1.0);
                mat.push(row);
                rhs.push(0.0);
            }
            let mut sum = vec![1.0; k];
            sum.push(0.0);
            mat.push(sum);
            rhs.push(1.0);
            let Some(sol_q) = linear_solve(mat, rhs) else { continue };
            if sol_p[..k].iter().chain(&sol_q[..k]).any(|&v| v < -tol) {
                continue;
            }
            let v = sol_p[k];
            let mut p = vec![0.0; m];
            for (t, &i) in rows.iter().enumerate() {
                p[i] = sol_p[t];
            }
            let mut q = vec![0.0; n];
            for (t, &j) in cols.iter().enumerate() {
                q[j] = sol_q[t];
            }
            let col_ok = (0..n).all(|j| (0..m).map(|i| p[i] * a[i][j]).sum::<f64>() >= v - tol);
            let row_ok = (0..m).all(|i| (0..n).map(|j| a[i][j] * q[j]).sum::<f64>() <= v + tol);
            if col_ok && row_ok {
                return Some((v, p));
            }
        }
    }
    None
}
