//! Dual policy iteration: a deterministic safety policy identifies the robust
//! invariant set while a stochastic task policy maximizes reward inside it.
//!
//! Each outer step runs `n` rounds of safety evaluation and greedy safety
//! improvement, evaluates the task policy, then improves it: on member states
//! by solving the restricted matrix game over admissible actions, elsewhere
//! by copying the safety policy as a point mass.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fixed_point::{SolverSettings, PARALLEL_CELLS};
use crate::game::{validate, DetPolicy, GameSpec, MixedPolicy, Role};
use crate::matrix_game::{solve_block, MatrixGameSolution};
use crate::perf::{constrained_residual, task_policy_eval};
use crate::qtable::{PerfQ, SafetyQ};
use crate::safety::{
    ambiguity_margin, apply_th, best_safety_value, check_feasibility,
    extract_working_set, safety_policy_eval,
    safety_policy_improve, support_policy_eval, InvariantSet,
};

#[derive(Debug, Clone, PartialEq)]
pub struct DpiConfig {
    /// Outer iterations (upper bound when early exit is on).
    pub m: usize,
    /// Safety rounds per outer iteration.
    pub n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub warm_start: bool,
    /// Extra safety rounds allowed before the first task evaluation.
    pub feasibility_retries: usize,
    pub threshold: f64,
    pub early_exit: bool,
}

impl Default for DpiConfig {
    fn default() -> Self {
        DpiConfig {
            m: 100,
            n: 2,
            tol: 1e-10,
            max_iter: 200_000,
            warm_start: true,
            feasibility_retries: 10,
            threshold: 0.0,
            early_exit: true,
        }
    }
}

impl DpiConfig {
    pub fn check(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("m and n must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        Ok(())
    }

    fn settings(&self) -> SolverSettings {
        SolverSettings::new(self.tol, self.max_iter)
    }
}

/// One outer step of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DpiStep {
    /// `Q_h` after this step's safety rounds.
    pub q_h: SafetyQ,
    /// Sup-norm change of `q_h` since the previous step (infinite at step 0).
    pub safety_delta: f64,
    pub safety_error_bound: f64,
    pub member_count: usize,
    pub feasible: bool,
    /// Worst violation of `Q_h^k <= T_h(Q_h^k) <= Q_h^{k+1}` over the rounds
    /// that completed during this step.
    pub chain_violation: f64,
    pub task_delta: f64,
    pub task_residual: f64,
    /// `max |T(q) - q|` on member states for the evaluated task values.
    pub constrained_residual: f64,
    /// Restricted matrix-game values used by the improvement; `None` off the set.
    pub lp_values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DpiTrace {
    pub steps: Vec<DpiStep>,
    /// Safety rounds spent on the feasibility gate beyond the first `n`.
    pub gate_rounds: usize,
    pub converged_early: bool,
    /// Constrained residual of the returned task values.
    pub final_constrained_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpiResult {
    pub pi: MixedPolicy,
    pub pi_h: DetPolicy,
    pub q: PerfQ,
    pub q_h: SafetyQ,
    pub inv: InvariantSet,
    pub trace: DpiTrace,
}

struct SafetyState<'a> {
    spec: &'a GameSpec,
    cfg: &'a DpiConfig,
    pi_h: DetPolicy,
    q_h: Option<SafetyQ>,
    error_bound: f64,
    /// `T_h` image of the last evaluated table, for the chain check.
    pending_upper: Option<SafetyQ>,
    chain_violation: f64,
}

impl SafetyState<'_> {
    fn round(&mut self) -> Result<()> {
        let warm = if self.cfg.warm_start { self.q_h.as_ref() } else { None };
        let fp = safety_policy_eval(self.spec, &self.pi_h, self.cfg.settings(), warm)?;
        if let Some(upper) = self.pending_upper.take() {
            self.chain_violation = self.chain_violation.max(-fp.q.min_gap(&upper));
        }
        let image = apply_th(&fp.q, self.spec);
        self.chain_violation = self.chain_violation.max(-image.min_gap(&fp.q));
        self.pending_upper = Some(image);
        self.pi_h = safety_policy_improve(&fp.q);
        self.error_bound = fp.error_bound;
        self.q_h = Some(fp.q);
        Ok(())
    }

    fn q_h(&self) -> &SafetyQ {
        self.q_h.as_ref().expect("at least one safety round")
    }
}

/// Runs from a uniform task policy and the all-zeros safety policy.
pub fn run(spec: &GameSpec, cfg: &DpiConfig) -> Result<DpiResult> {
    let pi = MixedPolicy::uniform(spec.n_states, spec.n_u);
    let pi_h = DetPolicy::constant(Role::Protagonist, spec.n_states, 0);
    run_from(spec, cfg, pi, pi_h)
}

pub fn run_from(
    spec: &GameSpec,
    cfg: &DpiConfig,
    mut pi: MixedPolicy,
    pi_h: DetPolicy,
) -> Result<DpiResult> {
    let report = validate(spec);
    if !report.passed() {
        return Err(Error::InvalidSpec(report.to_string()));
    }
    cfg.check()?;
    let settings = cfg.settings();
    let mut safety = SafetyState {
        spec,
        cfg,
        pi_h,
        q_h: None,
        error_bound: 0.0,
        pending_upper: None,
        chain_violation: 0.0,
    };
    let mut trace = DpiTrace::default();
    let mut q: Option<PerfQ> = None;
    let mut prev_q_h: Option<SafetyQ> = None;
    let mut inv = None;

    for k in 0..cfg.m {
        safety.chain_violation = 0.0;
        for _ in 0..cfg.n {
            safety.round()?;
        }
        if k == 0 {
            while !check_feasibility(safety.q_h(), cfg.threshold) {
                if trace.gate_rounds == cfg.feasibility_retries {
                    return Err(Error::InfeasibleGame {
                        best: best_safety_value(safety.q_h()),
                    });
                }
                safety.round()?;
                trace.gate_rounds += 1;
            }
        }
        let q_h = safety.q_h().clone();
        let step_inv = extract_working_set(&q_h, cfg.threshold, 10.0 * safety.error_bound);
        let safety_delta = prev_q_h.as_ref().map_or(f64::INFINITY, |p| q_h.sup_dist(p));

        let warm = if cfg.warm_start { q.as_ref() } else { None };
        let eval = task_policy_eval(spec, &pi, settings, warm)?;
        let task_delta = q.as_ref().map_or(f64::INFINITY, |p| eval.q.sup_dist(p));
        let c_res = constrained_residual(&eval.q, spec, &step_inv)?;

        let mut step = DpiStep {
            q_h: q_h.clone(),
            safety_delta,
            safety_error_bound: safety.error_bound,
            member_count: step_inv.member_count(),
            feasible: check_feasibility(&q_h, cfg.threshold),
            chain_violation: safety.chain_violation,
            task_delta,
            task_residual: eval.residual,
            constrained_residual: c_res,
            lp_values: vec![None; spec.n_states],
        };
        q = Some(eval.q);
        prev_q_h = Some(q_h);

        if cfg.early_exit && k > 0 && safety_delta <= cfg.tol && task_delta <= cfg.tol {
            trace.steps.push(step);
            trace.converged_early = true;
            trace.final_constrained_residual = c_res;
            inv = Some(step_inv);
            break;
        }

        let solutions = improve_members(q.as_ref().unwrap(), &step_inv)?;
        for (x, sol) in solutions {
            step.lp_values[x] = Some(sol.value);
            pi.set_row(x, &sol.strategy);
        }
        for x in (0..spec.n_states).filter(|&x| !step_inv.is_member(x)) {
            pi.set_point_mass(x, safety.pi_h.at(x));
        }
        trace.steps.push(step);
        inv = Some(step_inv);
    }

    let inv = inv.expect("m >= 1");
    let mut q = q.expect("m >= 1");
    if !trace.converged_early {
        // Re-evaluate so the returned values belong to the returned policy.
        let warm = if cfg.warm_start { Some(&q) } else { None };
        q = task_policy_eval(spec, &pi, settings, warm)?.q;
        trace.final_constrained_residual = constrained_residual(&q, spec, &inv)?;
    }
    Ok(DpiResult {
        pi,
        pi_h: safety.pi_h,
        q,
        q_h: safety.q_h.expect("at least one safety round"),
        inv,
        trace,
    })
}

fn improve_members(q: &PerfQ, inv: &InvariantSet) -> Result<Vec<(usize, MatrixGameSolution)>> {
    let members: Vec<usize> = inv.members().collect();
    let solve = |&x: &usize| {
        solve_block(q.state_block(x), q.n_u(), q.n_a(), inv.admissible(x)).map(|s| (x, s))
    };
    if q.values().len() >= PARALLEL_CELLS {
        members.par_iter().map(solve).collect()
    } else {
        members.iter().map(solve).collect()
    }
}

/// Robust invariant set of a stochastic task policy, using the worst action
/// in its support at every state.
pub fn task_policy_invariant_set(
    spec: &GameSpec,
    pi: &MixedPolicy,
    settings: SolverSettings,
    threshold: f64,
) -> Result<InvariantSet> {
    let fp = support_policy_eval(spec, pi, settings)?;
    Ok(extract_working_set(&fp.q, threshold, ambiguity_margin(&fp)))
}

/// Margin used to flag boundary-ambiguous states for the final safety table.
pub fn final_margin(result: &DpiResult) -> f64 {
    result
        .trace
        .steps
        .last()
        .map_or(0.0, |s| 10.0 * s.safety_error_bound)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Last safety delta is within tolerance.
    pub converged: bool,
    /// First step whose safety delta is within tolerance.
    pub converged_at: Option<usize>,
    /// Safety snapshots non-decreasing and member counts non-decreasing.
    pub monotone: bool,
    pub values_monotone: bool,
    pub members_monotone: bool,
    /// Largest chain violation recorded in any step.
    pub max_chain_violation: f64,
    pub chain_ok: bool,
    pub constrained_ok: bool,
}

pub fn check_convergence(trace: &DpiTrace, tol: f64) -> ConvergenceReport {
    let steps = &trace.steps;
    let converged_at = steps.iter().position(|s| s.safety_delta <= tol);
    let values_monotone = steps
        .windows(2)
        .all(|w| w[1].q_h.min_gap(&w[0].q_h) >= -tol);
    let members_monotone = steps
        .windows(2)
        .all(|w| w[1].member_count >= w[0].member_count);
    let max_chain_violation = steps
        .iter()
        .map(|s| s.chain_violation)
        .fold(0.0, f64::max);
    ConvergenceReport {
        converged: steps.last().is_some_and(|s| s.safety_delta <= tol),
        converged_at,
        monotone: values_monotone && members_monotone,
        values_monotone,
        members_monotone,
        max_chain_violation,
        chain_ok: max_chain_violation <= tol,
        constrained_ok: trace.final_constrained_residual <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::reference;
    use crate::safety::optimal_safety;

    #[test]
    fn self_loop_run() {
        let spec = reference::self_loop();
        let cfg = DpiConfig { m: 2, n: 2, ..Default::default() };
        let res = run(&spec, &cfg).unwrap();
        assert_eq!(res.pi_h.actions(), &[0]);
        assert_eq!(res.pi.row(0), &[1.0]);
        assert!((res.q.get(0, 0, 0) - 2.0).abs() < 1e-8);
        assert!((res.q_h.get(0, 0, 0) - 2.0).abs() < 1e-8);
        assert!(res.trace.steps.iter().all(|s| s.member_count == 1));
        let report = check_convergence(&res.trace, 1e-8);
        assert_eq!(report.converged_at, Some(1));
        assert!(report.converged && report.monotone);
    }

    #[test]
    fn trap_run_plays_only_safe_action() {
        let spec = reference::absorbing_trap();
        let res = run(&spec, &DpiConfig::default()).unwrap();
        assert_eq!(res.pi.row(0), &[1.0, 0.0]);
        assert!((res.q.get(0, 0, 0) - 1.0 / (1.0 - spec.gamma)).abs() < 1e-8);
        assert_eq!(res.pi.row(1)[res.pi_h.at(1)], 1.0);
        let report = check_convergence(&res.trace, 1e-8);
        assert!(report.converged && report.monotone && report.constrained_ok);
        assert!(res.trace.steps.iter().all(|s| s.member_count == 1));
    }

    #[test]
    fn matching_game_is_infeasible() {
        let spec = reference::matching();
        let err = run(&spec, &DpiConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleGame { best } if best < 0.0));
    }

    #[test]
    fn decreasing_snapshots_break_monotonicity() {
        let spec = reference::absorbing_trap();
        let res = run(&spec, &DpiConfig { early_exit: false, m: 3, ..Default::default() }).unwrap();
        let mut trace = res.trace.clone();
        let mut lowered = trace.steps[0].clone();
        lowered.q_h = SafetyQ::constant(&spec, -5.0);
        trace.steps.push(lowered);
        let report = check_convergence(&trace, 1e-8);
        assert!(!report.monotone && !report.values_monotone);

        let mut shrinking = res.trace.clone();
        shrinking.steps[1].member_count = 0;
        assert!(!check_convergence(&shrinking, 1e-8).members_monotone);
    }

    #[test]
    fn terminal_safety_matches_bellman_fixed_point() {
        for seed in 0..5 {
            let spec = crate::envs::random_game(&crate::envs::RandomGameParams {
                seed,
                ..Default::default()
            });
            let Ok(res) = run(&spec, &DpiConfig::default()) else { continue };
            let star = optimal_safety(&spec, SolverSettings::default()).unwrap();
            assert!(res.q_h.sup_dist(&star.q) < 1e-8);
        }
    }

    #[test]
    fn config_is_checked() {
        let spec = reference::self_loop();
        assert!(run(&spec, &DpiConfig { m: 0, ..Default::default() }).is_err());
        assert!(run(&spec, &DpiConfig { tol: 0.0, ..Default::default() }).is_err());
    }
}
