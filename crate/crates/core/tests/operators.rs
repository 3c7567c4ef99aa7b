use dualpi::envs::{random_game, RandomGameParams};
use dualpi::fixed_point::Operator;
use dualpi::perf::{PairPerfOp, PolicyPerfOp};
use dualpi::safety::{
    apply_th, extract_invariant_set, optimal_safety, safety_policy_eval, PairSafetyOp, PolicySafetyOp,
    SafetyBellmanOp,
};
use dualpi::{DetPolicy, GameSpec, MixedPolicy, PerfQ, Role, SafetyQ, SolverSettings};
use proptest::prelude::*;

fn game(seed: u64, n_states: usize, n_act: usize) -> GameSpec {
    random_game(&RandomGameParams {
        n_states,
        n_u: n_act,
        n_a: n_act,
        seed,
        ..Default::default()
    })
}

fn det(role: Role, spec: &GameSpec, picks: &[usize], n: usize) -> DetPolicy {
    let acts = (0..spec.n_states).map(|x| picks[x % picks.len()] % n).collect();
    DetPolicy::new(role, acts, spec).unwrap()
}

fn mixed(weights: &[f64], n_states: usize, n_actions: usize) -> MixedPolicy {
    let rows = (0..n_states)
        .map(|x| {
            let w: Vec<f64> = (0..n_actions)
                .map(|a| weights[(x * n_actions + a) % weights.len()] + 0.01)
                .collect();
            let t: f64 = w.iter().sum();
            let mut row: Vec<f64> = w.iter().map(|v| v / t).collect();
            let s: f64 = row.iter().sum();
            row[0] += 1.0 - s;
            row
        })
        .collect();
    MixedPolicy::from_rows(rows).unwrap()
}

fn table<K>(spec: &GameSpec, vals: &[f64]) -> dualpi::QTable<K> {
    dualpi::QTable::from_fn(spec, |c| vals[c % vals.len()])
}

fn slack(a: &[f64], b: &[f64]) -> f64 {
    let m = a.iter().chain(b).fold(1.0_f64, |m, v| m.max(v.abs()));
    8.0 * f64::EPSILON * m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn all_operators_contract(
        seed in 0u64..1000,
        picks in prop::collection::vec(0usize..3, 8),
        weights in prop::collection::vec(0.0f64..1.0, 1..24),
        v1 in prop::collection::vec(-5.0f64..5.0, 72),
        v2 in prop::collection::vec(-5.0f64..5.0, 72),
    ) {
        let spec = game(seed, 8, 3);
        let pi_h = det(Role::Protagonist, &spec, &picks, 3);
        let mu_h = det(Role::Adversary, &spec, &picks[1..], 3);
        let pi = mixed(&weights, 8, 3);
        let mu = mixed(&weights[weights.len() / 2..], 8, 3);
        let (qa, qb): (SafetyQ, SafetyQ) = (table(&spec, &v1), table(&spec, &v2));
        let eps = slack(&v1, &v2);
        let safety: [&dyn Operator<dualpi::qtable::Safety>; 3] = [
            &PairSafetyOp { spec: &spec, pi_h: &pi_h, mu_h: &mu_h },
            &PolicySafetyOp { spec: &spec, pi_h: &pi_h },
            &SafetyBellmanOp { spec: &spec },
        ];
        for op in safety {
            prop_assert!(op.apply(&qa).sup_dist(&op.apply(&qb)) <= spec.gamma_h * qa.sup_dist(&qb) + eps);
        }
        let (pa, pb): (PerfQ, PerfQ) = (table(&spec, &v1), table(&spec, &v2));
        let perf: [&dyn Operator<dualpi::qtable::Perf>; 2] = [
            &PairPerfOp { spec: &spec, pi: &pi, mu: &mu },
            &PolicyPerfOp { spec: &spec, pi: &pi },
        ];
        for op in perf {
            prop_assert!(op.apply(&pa).sup_dist(&op.apply(&pb)) <= spec.gamma * pa.sup_dist(&pb) + eps);
        }
    }

    #[test]
    fn all_operators_are_monotone(
        seed in 0u64..1000,
        picks in prop::collection::vec(0usize..3, 8),
        weights in prop::collection::vec(0.0f64..1.0, 1..24),
        v in prop::collection::vec(-5.0f64..5.0, 72),
        drop in prop::collection::vec(0.0f64..3.0, 72),
    ) {
        let spec = game(seed, 8, 3);
        let pi_h = det(Role::Protagonist, &spec, &picks, 3);
        let mu_h = det(Role::Adversary, &spec, &picks[2..], 3);
        let pi = mixed(&weights, 8, 3);
        let mu = mixed(&weights[weights.len() / 3..], 8, 3);
        let lower: Vec<f64> = v.iter().zip(&drop).map(|(a, d)| a - d).collect();
        let (hi, lo): (SafetyQ, SafetyQ) = (table(&spec, &v), table(&spec, &lower));
        let safety: [&dyn Operator<dualpi::qtable::Safety>; 3] = [
            &PairSafetyOp { spec: &spec, pi_h: &pi_h, mu_h: &mu_h },
            &PolicySafetyOp { spec: &spec, pi_h: &pi_h },
            &SafetyBellmanOp { spec: &spec },
        ];
        for op in safety {
            prop_assert!(op.apply(&hi).min_gap(&op.apply(&lo)) >= 0.0);
        }
        let (phi, plo): (PerfQ, PerfQ) = (table(&spec, &v), table(&spec, &lower));
        let perf: [&dyn Operator<dualpi::qtable::Perf>; 2] = [
            &PairPerfOp { spec: &spec, pi: &pi, mu: &mu },
            &PolicyPerfOp { spec: &spec, pi: &pi },
        ];
        for op in perf {
            prop_assert!(op.apply(&phi).min_gap(&op.apply(&plo)) >= 0.0);
        }
    }

    #[test]
    fn set_inclusion_chain(seed in 0u64..500, picks in prop::collection::vec(0usize..3, 8)) {
        let spec = game(seed, 8, 3);
        let s = SolverSettings::default();
        let pi_h = det(Role::Protagonist, &spec, &picks, 3);
        let policy_set = extract_invariant_set(&safety_policy_eval(&spec, &pi_h, s, None).unwrap().q, 0.0);
        let optimal_set = extract_invariant_set(&optimal_safety(&spec, s).unwrap().q, 0.0);
        prop_assert!(policy_set.is_subset_of(&optimal_set));
        prop_assert!(dualpi::safety::mask_subset(optimal_set.member_mask(), &spec.constraint_set()));
    }

    #[test]
    fn policy_iteration_chain(seed in 0u64..500, picks in prop::collection::vec(0usize..3, 8)) {
        let spec = game(seed, 8, 3);
        let s = SolverSettings::new(1e-12, 200_000);
        let pi_h = det(Role::Protagonist, &spec, &picks, 3);
        let qk = safety_policy_eval(&spec, &pi_h, s, None).unwrap().q;
        let backed = apply_th(&qk, &spec);
        let next = dualpi::safety::safety_policy_improve(&qk);
        let qk1 = safety_policy_eval(&spec, &next, s, Some(&qk)).unwrap().q;
        let star = optimal_safety(&spec, s).unwrap().q;
        let tol = 1e-8;
        prop_assert!(backed.min_gap(&qk) >= -tol);
        prop_assert!(qk1.min_gap(&backed) >= -tol);
        prop_assert!(star.min_gap(&qk1) >= -tol);
    }
}

#[test]
fn returned_fixed_points_pass_a_recheck() {
    for seed in 0..10 {
        let spec = game(seed, 8, 3);
        let s = SolverSettings::default();
        let fp = optimal_safety(&spec, s).unwrap();
        assert!(apply_th(&fp.q, &spec).sup_dist(&fp.q) <= s.tol);
        let pi_h = DetPolicy::constant(Role::Protagonist, 8, 1);
        let fp = safety_policy_eval(&spec, &pi_h, s, None).unwrap();
        let op = PolicySafetyOp { spec: &spec, pi_h: &pi_h };
        assert!(op.apply(&fp.q).sup_dist(&fp.q) <= s.tol);
    }
}
