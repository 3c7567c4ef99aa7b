//! Discounted safety operators, safety policy iteration steps and robust
//! invariant set extraction.
//!
//! All operators share the backup
//!
//! ```text
//! T(q)(x, u, a) = (1 - γ_h) h(x) + γ_h min{ h(x), c(x') },   x' = f(x, u, a)
//! ```
//!
//! and differ only in the continuation value `c(x')` read from `q`:
//!
//! | operator            | `c(x')`                                   |
//! |---------------------|-------------------------------------------|
//! | `T_h^{π_h,μ_h}`     | `q(x', π_h(x'), μ_h(x'))`                 |
//! | `T_h^{π_h}`         | `min_a' q(x', π_h(x'), a')`               |
//! | `T_h`               | `max_u' min_a' q(x', u', a')`             |
//! | support operator    | `min_{u' ∈ supp π(x')} min_a' q(x', u', a')` |
//!
//! Policies are evaluated at the successor state `x'`.

use crate::error::Result;
use crate::fixed_point::{fixed_point, per_state, sweep, FixedPoint, Operator, SolverSettings};
use crate::game::{DetPolicy, GameSpec, MixedPolicy, Role};
use crate::qtable::{Safety, SafetyQ};

fn backup(spec: &GameSpec, cont: &[f64]) -> SafetyQ {
    let g = spec.gamma_h;
    let per_x = spec.n_u * spec.n_a;
    sweep(spec, |cell| {
        let h = spec.constraint[cell / per_x];
        let next = spec.transition[cell];
        (1.0 - g) * h + g * h.min(cont[next])
    })
}

/// `T_h^{π_h,μ_h}` for a fixed protagonist/adversary pair.
pub struct PairSafetyOp<'a> {
    pub spec: &'a GameSpec,
    pub pi_h: &'a DetPolicy,
    pub mu_h: &'a DetPolicy,
}

impl Operator<Safety> for PairSafetyOp<'_> {
    fn apply(&self, q: &SafetyQ) -> SafetyQ {
        let cont = per_state(self.spec, |x| q.get(x, self.pi_h.at(x), self.mu_h.at(x)));
        backup(self.spec, &cont)
    }

    fn rate(&self) -> f64 {
        self.spec.gamma_h
    }
}

/// `T_h^{π_h}`: protagonist fixed, adversary minimizing.
pub struct PolicySafetyOp<'a> {
    pub spec: &'a GameSpec,
    pub pi_h: &'a DetPolicy,
}

impl Operator<Safety> for PolicySafetyOp<'_> {
    fn apply(&self, q: &SafetyQ) -> SafetyQ {
        let cont = per_state(self.spec, |x| q.worst_case(x, self.pi_h.at(x)));
        backup(self.spec, &cont)
    }

    fn rate(&self) -> f64 {
        self.spec.gamma_h
    }
}

/// `T_h`: the safety Bellman operator.
pub struct SafetyBellmanOp<'a> {
    pub spec: &'a GameSpec,
}

impl Operator<Safety> for SafetyBellmanOp<'_> {
    fn apply(&self, q: &SafetyQ) -> SafetyQ {
        let cont = per_state(self.spec, |x| q.max_min(x).0);
        backup(self.spec, &cont)
    }

    fn rate(&self) -> f64 {
        self.spec.gamma_h
    }
}

/// Safety operator of a stochastic protagonist: the worst action in the
/// support of `π(·|x')` is taken, since any supported action may be played.
pub struct SupportSafetyOp<'a> {
    pub spec: &'a GameSpec,
    pub pi: &'a MixedPolicy,
}

impl Operator<Safety> for SupportSafetyOp<'_> {
    fn apply(&self, q: &SafetyQ) -> SafetyQ {
        let cont = per_state(self.spec, |x| {
            self.pi
                .support(x)
                .map(|u| q.worst_case(x, u))
                .fold(f64::INFINITY, f64::min)
        });
        backup(self.spec, &cont)
    }

    fn rate(&self) -> f64 {
        self.spec.gamma_h
    }
}

pub fn apply_th_pimu(q: &SafetyQ, spec: &GameSpec, pi_h: &DetPolicy, mu_h: &DetPolicy) -> SafetyQ {
    PairSafetyOp { spec, pi_h, mu_h }.apply(q)
}

pub fn apply_th_pi(q: &SafetyQ, spec: &GameSpec, pi_h: &DetPolicy) -> SafetyQ {
    PolicySafetyOp { spec, pi_h }.apply(q)
}

pub fn apply_th(q: &SafetyQ, spec: &GameSpec) -> SafetyQ {
    SafetyBellmanOp { spec }.apply(q)
}

/// Fixed point of `T_h`, started from `h` broadcast over actions.
pub fn optimal_safety(spec: &GameSpec, settings: SolverSettings) -> Result<FixedPoint<Safety>> {
    fixed_point(&SafetyBellmanOp { spec }, constraint_table(spec), settings)
}

/// `q(x, u, a) = h(x)`, an upper bound on every safety fixed point.
pub fn constraint_table(spec: &GameSpec) -> SafetyQ {
    let per_x = spec.n_u * spec.n_a;
    SafetyQ::from_fn(spec, |cell| spec.constraint[cell / per_x])
}

/// Solves for `Q_h^{π_h}`, warm-started from `warm` when given.
pub fn safety_policy_eval(
    spec: &GameSpec,
    pi_h: &DetPolicy,
    settings: SolverSettings,
    warm: Option<&SafetyQ>,
) -> Result<FixedPoint<Safety>> {
    let q0 = warm.cloned().unwrap_or_else(|| SafetyQ::zeros(spec));
    fixed_point(&PolicySafetyOp { spec, pi_h }, q0, settings)
}

/// Solves for the safety value of a stochastic protagonist (worst supported action).
pub fn support_policy_eval(
    spec: &GameSpec,
    pi: &MixedPolicy,
    settings: SolverSettings,
) -> Result<FixedPoint<Safety>> {
    fixed_point(&SupportSafetyOp { spec, pi }, SafetyQ::zeros(spec), settings)
}

/// `π_h(x) = argmax_u min_a q(x, u, a)`, lowest index on ties.
pub fn safety_policy_improve(q: &SafetyQ) -> DetPolicy {
    let actions = (0..q.n_states()).map(|x| q.max_min(x).1).collect();
    DetPolicy::from_actions_unchecked(Role::Protagonist, actions)
}

/// Membership mask and admissible protagonist actions derived from a safety table.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSet {
    member: Vec<bool>,
    admissible: Vec<Vec<usize>>,
    /// States whose max-min value is too close to the threshold to classify.
    ambiguous: Vec<bool>,
    values: Vec<f64>,
    threshold: f64,
}

impl InvariantSet {
    pub fn is_member(&self, x: usize) -> bool {
        self.member[x]
    }

    pub fn member_mask(&self) -> &[bool] {
        &self.member
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.member
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(x, _)| x)
    }

    pub fn member_count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.member_count() == 0
    }

    pub fn n_states(&self) -> usize {
        self.member.len()
    }

    /// `U_s(x)`; empty for non-members.
    pub fn admissible(&self, x: usize) -> &[usize] {
        &self.admissible[x]
    }

    pub fn is_ambiguous(&self, x: usize) -> bool {
        self.ambiguous[x]
    }

    pub fn ambiguous_mask(&self) -> &[bool] {
        &self.ambiguous
    }

    /// `max_u min_a q(x, u, a)` per state.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_subset_of(&self, other: &InvariantSet) -> bool {
        mask_subset(&self.member, &other.member)
    }
}

/// `a ⊆ b` for membership masks of equal length.
pub fn mask_subset(a: &[bool], b: &[bool]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(&x, &y)| !x || y)
}

/// `{x : max_u min_a q >= threshold}` and `U_s(x) = {u : min_a q(x, u, a) >= threshold}`.
pub fn extract_invariant_set(q: &SafetyQ, threshold: f64) -> InvariantSet {
    extract_invariant_set_with_margin(q, threshold, 0.0)
}

/// As [`extract_invariant_set`], additionally flagging states whose value lies
/// strictly within `margin` of the threshold.
pub fn extract_invariant_set_with_margin(q: &SafetyQ, threshold: f64, margin: f64) -> InvariantSet {
    let n = q.n_states();
    let mut member = Vec::with_capacity(n);
    let mut admissible = Vec::with_capacity(n);
    let mut ambiguous = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for x in 0..n {
        let allowed: Vec<usize> = (0..q.n_u())
            .filter(|&u| q.worst_case(x, u) >= threshold)
            .collect();
        let value = q.max_min(x).0;
        member.push(!allowed.is_empty());
        admissible.push(allowed);
        ambiguous.push((value - threshold).abs() < margin);
        values.push(value);
    }
    InvariantSet {
        member,
        admissible,
        ambiguous,
        values,
        threshold,
    }
}

/// Working set for an approximate table: states and actions within `margin`
/// below the threshold are kept, so a value converging to the threshold from
/// below is not dropped. Such states are always flagged ambiguous.
pub fn extract_working_set(q: &SafetyQ, threshold: f64, margin: f64) -> InvariantSet {
    let mut set = extract_invariant_set_with_margin(q, threshold - margin, 0.0);
    set.threshold = threshold;
    set.ambiguous = set.values.iter().map(|&v| (v - threshold).abs() < margin).collect();
    set
}

/// Ambiguity margin for a converged solve: ten times its distance bound.
pub fn ambiguity_margin<K>(fp: &FixedPoint<K>) -> f64 {
    10.0 * fp.error_bound
}

/// `max_x max_u min_a q(x, u, a) >= threshold`.
pub fn check_feasibility(q_star: &SafetyQ, threshold: f64) -> bool {
    best_safety_value(q_star) >= threshold
}

pub fn best_safety_value(q: &SafetyQ) -> f64 {
    q.max_min_values()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}
