//! Finite constrained zero-sum Markov games with deterministic dynamics.
//!
//! States and actions are dense indices. Every `(x, u, a)` triple maps to a
//! flat cell index `(x * n_u + u) * n_a + a`, which is the layout shared by the
//! transition and reward tables and by every Q table in the crate.

use std::fmt;

use crate::error::{Error, Result};

/// A finite two-player zero-sum game with a state constraint `h(x) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub n_states: usize,
    pub n_u: usize,
    pub n_a: usize,
    /// `f(x, u, a)`, flat by cell index.
    pub transition: Vec<usize>,
    /// `r(x, u, a)`, flat by cell index.
    pub reward: Vec<f64>,
    /// `h(x)`, one entry per state.
    pub constraint: Vec<f64>,
    pub gamma: f64,
    pub gamma_h: f64,
}

impl GameSpec {
    /// Builds a spec and rejects it unless [`validate`] passes.
    pub fn new(
        n_states: usize,
        n_u: usize,
        n_a: usize,
        transition: Vec<usize>,
        reward: Vec<f64>,
        constraint: Vec<f64>,
        gamma: f64,
        gamma_h: f64,
    ) -> Result<Self> {
        GameSpec {
            n_states,
            n_u,
            n_a,
            transition,
            reward,
            constraint,
            gamma,
            gamma_h,
        }
        .checked()
    }

    /// Returns `self` if valid, otherwise an [`Error::InvalidSpec`] listing every failure.
    pub fn checked(self) -> Result<Self> {
        let report = validate(&self);
        if report.passed() {
            Ok(self)
        } else {
            Err(Error::InvalidSpec(report.to_string()))
        }
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_states * self.n_u * self.n_a
    }

    #[inline]
    pub fn cell(&self, x: usize, u: usize, a: usize) -> usize {
        (x * self.n_u + u) * self.n_a + a
    }

    #[inline]
    pub fn next(&self, x: usize, u: usize, a: usize) -> usize {
        self.transition[self.cell(x, u, a)]
    }

    #[inline]
    pub fn reward(&self, x: usize, u: usize, a: usize) -> f64 {
        self.reward[self.cell(x, u, a)]
    }

    #[inline]
    pub fn h(&self, x: usize) -> f64 {
        self.constraint[x]
    }

    pub fn with_gamma_h(&self, gamma_h: f64) -> Self {
        GameSpec {
            gamma_h,
            ..self.clone()
        }
    }

    /// The constraint set `{x : h(x) >= 0}` as a mask.
    pub fn constraint_set(&self) -> Vec<bool> {
        self.constraint.iter().map(|&h| h >= 0.0).collect()
    }
}

/// One failed check from [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroCount(&'static str),
    TableLength {
        table: &'static str,
        expected: usize,
        found: usize,
    },
    TransitionOutOfRange { cell: usize, value: usize },
    GammaOutOfRange(f64),
    GammaHOutOfRange(f64),
    NonFiniteReward { cell: usize },
    NonFiniteConstraint { state: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroCount(what) => write!(f, "{what} must be positive"),
            Violation::TableLength {
                table,
                expected,
                found,
            } => write!(f, "{table} table has {found} entries, expected {expected}"),
            Violation::TransitionOutOfRange { cell, value } => {
                write!(f, "transition index out of range at cell {cell}: {value}")
            }
            Violation::GammaOutOfRange(g) => write!(f, "gamma out of range: {g}"),
            Violation::GammaHOutOfRange(g) => write!(f, "gamma_h out of range: {g}"),
            Violation::NonFiniteReward { cell } => write!(f, "reward at cell {cell} is not finite"),
            Violation::NonFiniteConstraint { state } => {
                write!(f, "constraint at state {state} is not finite")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "pass");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "fail: {}", msgs.join("; "))
    }
}

/// Checks every structural invariant of a spec and reports all failures at once.
pub fn validate(spec: &GameSpec) -> ValidationReport {
    let mut violations = Vec::new();
    for (name, n) in [
        ("n_states", spec.n_states),
        ("n_u", spec.n_u),
        ("n_a", spec.n_a),
    ] {
        if n == 0 {
            violations.push(Violation::ZeroCount(name));
        }
    }
    let cells = spec.n_cells();
    for (table, found) in [
        ("transition", spec.transition.len()),
        ("reward", spec.reward.len()),
    ] {
        if found != cells {
            violations.push(Violation::TableLength {
                table,
                expected: cells,
                found,
            });
        }
    }
    if spec.constraint.len() != spec.n_states {
        violations.push(Violation::TableLength {
            table: "constraint",
            expected: spec.n_states,
            found: spec.constraint.len(),
        });
    }
    for (cell, &next) in spec.transition.iter().enumerate() {
        if next >= spec.n_states {
            violations.push(Violation::TransitionOutOfRange { cell, value: next });
        }
    }
    if !(spec.gamma > 0.0 && spec.gamma < 1.0) {
        violations.push(Violation::GammaOutOfRange(spec.gamma));
    }
    if !(spec.gamma_h > 0.0 && spec.gamma_h < 1.0) {
        violations.push(Violation::GammaHOutOfRange(spec.gamma_h));
    }
    for (cell, r) in spec.reward.iter().enumerate() {
        if !r.is_finite() {
            violations.push(Violation::NonFiniteReward { cell });
        }
    }
    for (state, h) in spec.constraint.iter().enumerate() {
        if !h.is_finite() {
            violations.push(Violation::NonFiniteConstraint { state });
        }
    }
    ValidationReport { violations }
}

/// Which player a deterministic policy belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Protagonist,
    Adversary,
}

/// A deterministic stationary policy `x -> action`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DetPolicy {
    role: Role,
    action: Vec<usize>,
}

impl DetPolicy {
    pub fn new(role: Role, action: Vec<usize>, spec: &GameSpec) -> Result<Self> {
        let limit = match role {
            Role::Protagonist => spec.n_u,
            Role::Adversary => spec.n_a,
        };
        if action.len() != spec.n_states {
            return Err(Error::InvalidConfig(format!(
                "policy covers {} states, game has {}",
                action.len(),
                spec.n_states
            )));
        }
        if let Some((x, &u)) = action.iter().enumerate().find(|(_, &u)| u >= limit) {
            return Err(Error::InvalidConfig(format!(
                "{role:?} action {u} at state {x} is out of range (limit {limit})"
            )));
        }
        Ok(DetPolicy { role, action })
    }

    /// The policy that plays `action` everywhere.
    pub fn constant(role: Role, n_states: usize, action: usize) -> Self {
        DetPolicy {
            role,
            action: vec![action; n_states],
        }
    }

    pub(crate) fn from_actions_unchecked(role: Role, action: Vec<usize>) -> Self {
        DetPolicy { role, action }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    #[inline]
    pub fn at(&self, x: usize) -> usize {
        self.action[x]
    }

    pub fn actions(&self) -> &[usize] {
        &self.action
    }

    pub fn len(&self) -> usize {
        self.action.len()
    }

    pub fn is_empty(&self) -> bool {
        self.action.is_empty()
    }
}

/// A stochastic stationary policy: one distribution over `n_actions` per state.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPolicy {
    n_actions: usize,
    prob: Vec<f64>,
}

pub const DISTRIBUTION_TOL: f64 = 1e-12;

impl MixedPolicy {
    /// `rows[x][u]` is the probability of action `u` at state `x`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = rows.first().map_or(0, |r| r.len());
        if n_actions == 0 {
            return Err(Error::InvalidConfig("empty mixed policy".into()));
        }
        let mut prob = Vec::with_capacity(rows.len() * n_actions);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::InvalidConfig(format!(
                    "row {x} has {} actions, expected {n_actions}",
                    row.len()
                )));
            }
            prob.extend_from_slice(row);
        }
        let policy = MixedPolicy { n_actions, prob };
        policy.check()?;
        Ok(policy)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        MixedPolicy {
            n_actions,
            prob: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn point_mass(n_actions: usize, actions: &[usize]) -> Self {
        let mut prob = vec![0.0; actions.len() * n_actions];
        for (x, &u) in actions.iter().enumerate() {
            prob[x * n_actions + u] = 1.0;
        }
        MixedPolicy { n_actions, prob }
    }

    pub fn from_det(policy: &DetPolicy, n_actions: usize) -> Self {
        Self::point_mass(n_actions, policy.actions())
    }

    fn check(&self) -> Result<()> {
        for (x, row) in self.prob.chunks(self.n_actions).enumerate() {
            if let Some(p) = row.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
                return Err(Error::InvalidConfig(format!(
                    "probability {p} at state {x} outside [0, 1]"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > DISTRIBUTION_TOL {
                return Err(Error::InvalidConfig(format!(
                    "row {x} sums to {total}, not 1"
                )));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.prob.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.prob[x * self.n_actions..(x + 1) * self.n_actions]
    }

    #[inline]
    pub fn prob(&self, x: usize, action: usize) -> f64 {
        self.prob[x * self.n_actions + action]
    }

    /// Replaces a state's row. The row must be a distribution.
    pub fn set_row(&mut self, x: usize, row: &[f64]) {
        assert_eq!(row.len(), self.n_actions);
        self.prob[x * self.n_actions..(x + 1) * self.n_actions].copy_from_slice(row);
    }

    pub fn set_point_mass(&mut self, x: usize, action: usize) {
        let row = &mut self.prob[x * self.n_actions..(x + 1) * self.n_actions];
        row.fill(0.0);
        row[action] = 1.0;
    }

    /// Actions with positive probability at `x`.
    pub fn support(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(x)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(u, _)| u)
    }
}

/// A deterministic rollout that stops one step after its orbit closes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub prot_actions: Vec<usize>,
    pub adv_actions: Vec<usize>,
    /// Index of the earliest entry that the last entry repeats.
    pub cycle_start: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Rolls out `x_{t+1} = f(x_t, u_t, a_t)` from `(x0, u0, a0)` with
/// `u_t = pi(x_t)` and `a_t = mu(x_t)` for `t >= 1`.
///
/// The orbit is closed once a state recurs together with the actions played
/// there. The first entry is keyed by `(x0, u0, a0)` and may differ from what
/// the policies would play at `x0`. Every later entry is fixed by its state,
/// so at most `n_states + 2` entries are produced.
pub fn rollout_det(
    spec: &GameSpec,
    x0: usize,
    u0: usize,
    a0: usize,
    pi: &DetPolicy,
    mu: &DetPolicy,
) -> Trajectory {
    debug_assert_eq!(pi.role(), Role::Protagonist);
    debug_assert_eq!(mu.role(), Role::Adversary);
    // first_seen[x] is the index where x appeared with its policy actions.
    let mut first_seen = vec![usize::MAX; spec.n_states];
    let mut states = vec![x0];
    let mut prot_actions = vec![u0];
    let mut adv_actions = vec![a0];
    if u0 == pi.at(x0) && a0 == mu.at(x0) {
        first_seen[x0] = 0;
    }
    let (mut x, mut u, mut a) = (x0, u0, a0);
    loop {
        let next = spec.next(x, u, a);
        let (nu, na) = (pi.at(next), mu.at(next));
        states.push(next);
        prot_actions.push(nu);
        adv_actions.push(na);
        if first_seen[next] != usize::MAX {
            return Trajectory {
                states,
                prot_actions,
                adv_actions,
                cycle_start: first_seen[next],
            };
        }
        first_seen[next] = states.len() - 1;
        (x, u, a) = (next, nu, na);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::reference;

    #[test]
    fn self_loop_game_is_valid() {
        assert!(validate(&reference::self_loop()).passed());
    }

    #[test]
    fn gamma_h_at_one_is_rejected() {
        let mut spec = reference::self_loop();
        spec.gamma_h = 1.0;
        let report = validate(&spec);
        assert!(!report.passed());
        assert!(report.to_string().contains("gamma_h out of range"));
    }

    #[test]
    fn transition_out_of_range_is_rejected() {
        let mut spec = reference::self_loop();
        spec.transition[0] = 5;
        let report = validate(&spec);
        assert!(report.to_string().contains("transition index out of range"));
        assert!(spec.checked().is_err());
    }

    #[test]
    fn report_collects_every_violation() {
        let mut spec = reference::self_loop();
        spec.gamma = 0.0;
        spec.gamma_h = f64::NAN;
        spec.reward[0] = f64::INFINITY;
        spec.constraint.push(1.0);
        assert_eq!(validate(&spec).violations.len(), 4);
    }

    #[test]
    fn self_loop_rollout() {
        let spec = reference::self_loop();
        let pi = DetPolicy::constant(Role::Protagonist, 1, 0);
        let mu = DetPolicy::constant(Role::Adversary, 1, 0);
        let traj = rollout_det(&spec, 0, 0, 0, &pi, &mu);
        assert_eq!(traj.states, vec![0, 0]);
        assert_eq!(traj.cycle_start, 0);
    }

    #[test]
    fn absorbing_trap_rollout() {
        let spec = reference::absorbing_trap();
        let pi = DetPolicy::constant(Role::Protagonist, 2, 0);
        let mu = DetPolicy::constant(Role::Adversary, 2, 0);
        let traj = rollout_det(&spec, 0, 1, 0, &pi, &mu);
        assert_eq!(traj.states, vec![0, 1, 1]);
        assert_eq!(traj.cycle_start, 1);
    }

    #[test]
    fn first_step_off_policy_does_not_close_orbit() {
        // 0 -(u=1)-> 1 -> 0 -(pi: u=0)-> 2 -> 2
        let spec = GameSpec::new(
            3,
            2,
            1,
            vec![2, 1, 0, 0, 2, 2],
            vec![0.0; 6],
            vec![1.0, 1.0, -1.0],
            0.5,
            0.5,
        )
        .unwrap();
        let pi = DetPolicy::constant(Role::Protagonist, 3, 0);
        let mu = DetPolicy::constant(Role::Adversary, 3, 0);
        let traj = rollout_det(&spec, 0, 1, 0, &pi, &mu);
        assert_eq!(traj.states, vec![0, 1, 0, 2, 2]);
        assert_eq!(traj.cycle_start, 3);
    }

    #[test]
    fn mixed_policy_rows_must_sum_to_one() {
        assert!(MixedPolicy::from_rows(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).is_ok());
        assert!(MixedPolicy::from_rows(vec![vec![0.5, 0.4]]).is_err());
        assert!(MixedPolicy::from_rows(vec![vec![1.5, -0.5]]).is_err());
    }

    #[test]
    fn det_policy_checks_role_range() {
        let spec = reference::absorbing_trap();
        assert!(DetPolicy::new(Role::Protagonist, vec![0, 1], &spec).is_ok());
        assert!(DetPolicy::new(Role::Protagonist, vec![0, 2], &spec).is_err());
        assert!(DetPolicy::new(Role::Adversary, vec![0, 1], &spec).is_err());
    }
}
