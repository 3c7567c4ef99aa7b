//! Shared benchmark instances.

use dualpi::envs::{gridworld, random_game, GridworldParams, RandomGameParams};
use dualpi::safety::{check_feasibility, optimal_safety};
use dualpi::{GameSpec, SolverSettings};

/// Random game with `n_states` states and 3x3 actions.
pub fn random(n_states: usize, seed: u64) -> GameSpec {
    random_game(&RandomGameParams {
        n_states,
        seed,
        ..Default::default()
    })
}

/// First feasible random game of the given size, scanning seeds from 0.
pub fn feasible_random(n_states: usize) -> GameSpec {
    (0..)
        .map(|seed| random(n_states, seed))
        .find(|spec| check_feasibility(&optimal_safety(spec, SolverSettings::default()).unwrap().q, 0.0))
        .unwrap()
}

/// Square grid with a hazard in the corner and a pushing adversary.
pub fn corner_grid(side: usize) -> GameSpec {
    let mut p = GridworldParams::new(side, side);
    p.hazard_cells.push((0, 0));
    p.adversary_strength = 1;
    gridworld(&p)
}
