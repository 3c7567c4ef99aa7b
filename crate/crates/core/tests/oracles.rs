use dualpi::envs::{gridworld, random_game, reference, GridworldParams, RandomGameParams};
use dualpi::game::rollout_det;
use dualpi::oracle::{
    discounted_sweep, forward_invariance_search, induced_game_solve, induced_sup_dist, minimax_safety_enum,
    safety_game_values, sign_certification, undiscounted_traj_value, ENUM_BUDGET,
};
use dualpi::perf::constrained_fixed_point;
use dualpi::safety::{ambiguity_margin, extract_invariant_set, extract_invariant_set_with_margin, optimal_safety};
use dualpi::{DetPolicy, GameSpec, PerfQ, Role, SolverSettings};
use proptest::prelude::*;

fn tiny(seed: u64) -> GameSpec {
    random_game(&RandomGameParams {
        n_states: 4,
        n_u: 2,
        n_a: 2,
        seed,
        gamma_h: 0.999,
        ..Default::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rollouts_replay_and_close(
        seed in 0u64..1000,
        pi in prop::collection::vec(0usize..3, 8),
        mu in prop::collection::vec(0usize..3, 8),
        start in (0usize..8, 0usize..3, 0usize..3),
    ) {
        let spec = random_game(&RandomGameParams { seed, ..Default::default() });
        let pi = DetPolicy::new(Role::Protagonist, pi, &spec).unwrap();
        let mu = DetPolicy::new(Role::Adversary, mu, &spec).unwrap();
        let (x0, u0, a0) = start;
        let t = rollout_det(&spec, x0, u0, a0, &pi, &mu);
        prop_assert!(t.len() <= spec.n_states + 2);
        prop_assert_eq!((t.states[0], t.prot_actions[0], t.adv_actions[0]), (x0, u0, a0));
        for i in 1..t.len() {
            prop_assert_eq!(t.states[i], spec.next(t.states[i - 1], t.prot_actions[i - 1], t.adv_actions[i - 1]));
            prop_assert_eq!(t.prot_actions[i], pi.at(t.states[i]));
            prop_assert_eq!(t.adv_actions[i], mu.at(t.states[i]));
        }
        // the last entry repeats the keyed entry where the cycle starts
        let last = t.len() - 1;
        prop_assert!(t.cycle_start < last);
        prop_assert_eq!(
            (t.states[last], t.prot_actions[last], t.adv_actions[last]),
            (t.states[t.cycle_start], t.prot_actions[t.cycle_start], t.adv_actions[t.cycle_start])
        );
        let m = t.states.iter().map(|&x| spec.h(x)).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(undiscounted_traj_value(&spec, x0, u0, a0, &pi, &mu), m);
    }
}

#[test]
fn enumeration_matches_safety_game_up_to_five_states() {
    for seed in 0..12 {
        for (n, k) in [(3, 3), (4, 2), (5, 2)] {
            let spec = random_game(&RandomGameParams {
                n_states: n,
                n_u: k,
                n_a: k,
                hazard_fraction: 0.4,
                seed,
                ..Default::default()
            });
            assert_eq!(
                minimax_safety_enum(&spec, ENUM_BUDGET).unwrap(),
                safety_game_values(&spec),
                "seed {seed} n {n}"
            );
        }
    }
}

#[test]
fn sign_certification_on_tiny_games() {
    for seed in 0..20 {
        let spec = tiny(seed);
        let fp = optimal_safety(&spec, SolverSettings::default()).unwrap();
        let inv = extract_invariant_set_with_margin(&fp.q, 0.0, ambiguity_margin(&fp));
        let exact = minimax_safety_enum(&spec, ENUM_BUDGET).unwrap();
        let report = sign_certification(&inv, &exact);
        assert!(report.passed(), "seed {seed}: {report:?}");
        assert_eq!(report.classified + report.skipped, 4);
    }
}

#[test]
fn discounted_values_approach_undiscounted_from_above() {
    let gammas = [0.9, 0.99, 0.999];
    for seed in 0..10 {
        let spec = tiny(seed);
        let exact = minimax_safety_enum(&spec, ENUM_BUDGET).unwrap();
        let sweep = discounted_sweep(&spec, &gammas, SolverSettings::new(1e-12, 1_000_000)).unwrap();
        for c in 0..spec.n_cells() {
            let vals: Vec<f64> = sweep.iter().map(|(_, q)| q.values()[c]).collect();
            let e = exact.values()[c];
            for w in vals.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "seed {seed} cell {c}: {vals:?}");
            }
            assert!(vals.iter().all(|&v| v >= e - 1e-9));
            // sign agreement at the largest discount when the exact value is clear of zero
            if e.abs() > 1e-3 {
                assert_eq!(vals[2] >= 0.0, e >= 0.0, "seed {seed} cell {c}");
            }
        }
    }
}

#[test]
fn sweep_matches_engine_fixed_points() {
    for seed in 0..5 {
        let spec = random_game(&RandomGameParams { seed, ..Default::default() });
        let s = SolverSettings::new(1e-12, 200_000);
        let sweep = discounted_sweep(&spec, &[0.9, 0.99], s).unwrap();
        for (g, q) in sweep {
            let engine = optimal_safety(&spec.with_gamma_h(g), s).unwrap().q;
            assert!(engine.sup_dist(&q) < 1e-9);
        }
    }
}

#[test]
fn forward_invariance_across_games() {
    let mut explored = 0;
    let mut specs: Vec<GameSpec> = (0..20)
        .map(|seed| random_game(&RandomGameParams { seed, ..Default::default() }))
        .collect();
    for adv in 0..2 {
        let mut p = GridworldParams::new(4, 4);
        p.hazard_cells.push((0, 0));
        p.adversary_strength = adv;
        specs.push(gridworld(&p));
    }
    for spec in &specs {
        let inv = extract_invariant_set(&optimal_safety(spec, SolverSettings::default()).unwrap().q, 0.0);
        let report = forward_invariance_search(spec, &inv);
        assert!(report.passed(), "{:?}", report.exits);
        explored += report.explored;
    }
    assert!(explored >= 10_000, "explored {explored}");
}

#[test]
fn induced_game_agrees_with_constrained_fixed_point() {
    let mut compared = 0;
    for seed in 0..20 {
        let spec = random_game(&RandomGameParams {
            n_states: 6,
            seed,
            ..Default::default()
        });
        let s = SolverSettings::new(1e-12, 200_000);
        let inv = extract_invariant_set(&optimal_safety(&spec, s).unwrap().q, 0.0);
        if inv.is_empty() {
            continue;
        }
        let engine = constrained_fixed_point(&spec, &inv, PerfQ::zeros(&spec), s).unwrap();
        let oracle = induced_game_solve(&spec, &inv, s).unwrap();
        assert!(induced_sup_dist(&engine.q, &oracle, &inv) < 1e-7, "seed {seed}");
        compared += 1;
    }
    assert!(compared >= 10);
}

#[test]
fn induced_game_reference_values() {
    let s = SolverSettings::new(1e-12, 200_000);
    let spec = reference::self_loop();
    let inv = extract_invariant_set(&optimal_safety(&spec, s).unwrap().q, 0.0);
    let q = induced_game_solve(&spec, &inv, s).unwrap();
    assert!((q.get(0, 0, 0) - 2.0).abs() < 1e-10);

    let spec = reference::absorbing_trap();
    let inv = extract_invariant_set(&optimal_safety(&spec, s).unwrap().q, 0.0);
    let q = induced_game_solve(&spec, &inv, s).unwrap();
    assert!((q.get(0, 0, 0) - 10.0).abs() < 1e-9);
}

#[test]
fn induced_game_rejects_leaky_sets() {
    let spec = reference::absorbing_trap();
    let leaky = extract_invariant_set(&dualpi::SafetyQ::from_values(2, 2, 1, vec![1.0, 1.0, -1.0, -1.0]), 0.0);
    assert!(matches!(
        induced_game_solve(&spec, &leaky, SolverSettings::default()),
        Err(dualpi::Error::NonMemberSuccessor { state: 0, prot: 1, .. })
    ));
}
