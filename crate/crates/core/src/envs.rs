//! Benchmark instances: seeded random games, an adversarial-push gridworld,
//! and three hand-built reference games.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::GameSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomGameParams {
    pub n_states: usize,
    pub n_u: usize,
    pub n_a: usize,
    /// Rewards are uniform on `[lo, hi)`.
    pub reward_range: (f64, f64),
    pub hazard_fraction: f64,
    pub gamma: f64,
    pub gamma_h: f64,
    pub seed: u64,
}

impl Default for RandomGameParams {
    fn default() -> Self {
        RandomGameParams {
            n_states: 8,
            n_u: 3,
            n_a: 3,
            reward_range: (-1.0, 1.0),
            hazard_fraction: 0.25,
            gamma: 0.95,
            gamma_h: 0.99,
            seed: 0,
        }
    }
}

impl RandomGameParams {
    pub fn check(&self) -> Result<()> {
        if self.n_states == 0 || self.n_u == 0 || self.n_a == 0 {
            return Err(Error::InvalidConfig("counts must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.hazard_fraction) {
            return Err(Error::InvalidConfig(format!(
                "hazard_fraction must lie in [0, 1), got {}",
                self.hazard_fraction
            )));
        }
        let (lo, hi) = self.reward_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig("reward_range must be a finite interval".into()));
        }
        Ok(())
    }

    /// Number of states with `h = -1`.
    pub fn hazard_count(&self) -> usize {
        (self.hazard_fraction * self.n_states as f64).floor() as usize
    }
}

/// Draws transitions, then rewards, then one hazard score per state from a
/// ChaCha8 stream; the lowest `floor(hazard_fraction * n_states)` scores get
/// `h = -1` and the rest `h = +1`.
///
/// Panics if `params` fails [`RandomGameParams::check`].
pub fn random_game(params: &RandomGameParams) -> GameSpec {
    params.check().expect("invalid random game parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_states;
    let cells = n * params.n_u * params.n_a;
    let transition: Vec<usize> = (0..cells).map(|_| rng.random_range(0..n)).collect();
    let (lo, hi) = params.reward_range;
    let reward: Vec<f64> = (0..cells).map(|_| rng.random_range(lo..hi)).collect();
    let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut constraint = vec![1.0; n];
    for &x in order.iter().take(params.hazard_count()) {
        constraint[x] = -1.0;
    }
    GameSpec {
        n_states: n,
        n_u: params.n_u,
        n_a: params.n_a,
        transition,
        reward,
        constraint,
        gamma: params.gamma,
        gamma_h: params.gamma_h,
    }
}

/// Displacements shared by both players: stay/none, N, S, E, W.
pub const MOVES: [(i64, i64); 5] = [(0, 0), (0, -1), (0, 1), (1, 0), (-1, 0)];

pub const MOVE_NAMES: [&str; 5] = ["stay", "N", "S", "E", "W"];

#[derive(Debug, Clone, PartialEq)]
pub struct GridworldParams {
    pub width: usize,
    pub height: usize,
    /// `(column, row)` cells with `h = -1`.
    pub hazard_cells: Vec<(usize, usize)>,
    pub goal_cell: (usize, usize),
    /// 0: the adversary has no effect; 1: it may push one cell.
    pub adversary_strength: u8,
    pub gamma: f64,
    pub gamma_h: f64,
}

impl GridworldParams {
    pub fn new(width: usize, height: usize) -> Self {
        GridworldParams {
            width,
            height,
            hazard_cells: Vec::new(),
            goal_cell: (width.saturating_sub(1), height.saturating_sub(1)),
            adversary_strength: 0,
            gamma: 0.95,
            gamma_h: 0.99,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::InvalidConfig("grid must be at least 2x2".into()));
        }
        let inside = |(c, r): (usize, usize)| c < self.width && r < self.height;
        if !inside(self.goal_cell) {
            return Err(Error::InvalidConfig("goal cell outside the grid".into()));
        }
        if let Some(c) = self.hazard_cells.iter().find(|&&c| !inside(c)) {
            return Err(Error::InvalidConfig(format!("hazard cell {c:?} outside the grid")));
        }
        if self.hazard_cells.contains(&self.goal_cell) {
            return Err(Error::InvalidConfig("goal cell is a hazard".into()));
        }
        if self.adversary_strength > 1 {
            return Err(Error::InvalidConfig("adversary_strength must be 0 or 1".into()));
        }
        Ok(())
    }

    /// State index of `(column, row)`.
    pub fn state(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn cell(&self, state: usize) -> (usize, usize) {
        (state % self.width, state / self.width)
    }
}

/// Builds the gridworld game.
///
/// The protagonist moves first and the adversary displacement is composed on
/// the same step; each stage is clipped at the walls. `h` is the Chebyshev
/// distance to the nearest hazard minus one (`width + height - 1` without
/// hazards). Entering the goal pays `+1`, every other step `-0.01`.
///
/// Panics if `params` fails [`GridworldParams::check`].
pub fn gridworld(params: &GridworldParams) -> GameSpec {
    params.check().expect("invalid gridworld parameters");
    let (w, h) = (params.width, params.height);
    let n = w * h;
    let clip = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;
    let step = |(c, r): (usize, usize), (dc, dr): (i64, i64)| {
        (clip(c as i64 + dc, w), clip(r as i64 + dr, h))
    };
    let mut transition = Vec::with_capacity(n * 25);
    let mut reward = Vec::with_capacity(n * 25);
    for x in 0..n {
        let here = params.cell(x);
        for &mv in &MOVES {
            let moved = step(here, mv);
            for &push in &MOVES {
                let landed = if params.adversary_strength == 1 {
                    step(moved, push)
                } else {
                    moved
                };
                transition.push(params.state(landed.0, landed.1));
                reward.push(if landed == params.goal_cell { 1.0 } else { -0.01 });
            }
        }
    }
    let constraint = (0..n)
        .map(|x| {
            let (c, r) = params.cell(x);
            let dist = params
                .hazard_cells
                .iter()
                .map(|&(hc, hr)| c.abs_diff(hc).max(r.abs_diff(hr)))
                .min()
                .unwrap_or(w + h);
            dist as f64 - 1.0
        })
        .collect();
    GameSpec {
        n_states: n,
        n_u: MOVES.len(),
        n_a: MOVES.len(),
        transition,
        reward,
        constraint,
        gamma: params.gamma,
        gamma_h: params.gamma_h,
    }
}

/// Small hand-built games with known safety values.
pub mod reference {
    use crate::game::GameSpec;

    /// One state, one action each, `h = 2`, `r = 1`, `γ = 0.5`, `γ_h = 0.9`.
    pub fn self_loop() -> GameSpec {
        GameSpec {
            n_states: 1,
            n_u: 1,
            n_a: 1,
            transition: vec![0],
            reward: vec![1.0],
            constraint: vec![2.0],
            gamma: 0.5,
            gamma_h: 0.9,
        }
    }

    /// `x0` (`h = 1`): action 0 self-loops, action 1 falls into the absorbing
    /// `x1` (`h = -1`). Single adversary action, `r = 1` on `x0`, `γ = γ_h = 0.9`.
    pub fn absorbing_trap() -> GameSpec {
        GameSpec {
            n_states: 2,
            n_u: 2,
            n_a: 1,
            transition: vec![0, 1, 1, 1],
            reward: vec![1.0, 1.0, 0.0, 0.0],
            constraint: vec![1.0, -1.0],
            gamma: 0.9,
            gamma_h: 0.9,
        }
    }

    /// `x0` (`h = 1`) stays put only when the protagonist matches the
    /// adversary, otherwise falls into the absorbing `x1` (`h = -1`).
    /// Two actions each, zero rewards, `γ = γ_h = 0.9`.
    pub fn matching() -> GameSpec {
        GameSpec {
            n_states: 2,
            n_u: 2,
            n_a: 2,
            transition: vec![0, 1, 1, 0, 1, 1, 1, 1],
            reward: vec![0.0; 8],
            constraint: vec![1.0, -1.0],
            gamma: 0.9,
            gamma_h: 0.9,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate;

    #[test]
    fn random_games_are_reproducible() {
        let p = RandomGameParams {
            seed: 7,
            ..Default::default()
        };
        assert_eq!(random_game(&p), random_game(&p));
        let other = RandomGameParams { seed: 8, ..p.clone() };
        assert_ne!(random_game(&p), random_game(&other));
        assert!(validate(&random_game(&p)).passed());
    }

    #[test]
    fn hazard_counts() {
        let none = random_game(&RandomGameParams {
            hazard_fraction: 0.0,
            ..Default::default()
        });
        assert!(none.constraint.iter().all(|&h| h == 1.0));
        assert!(none.constraint_set().iter().all(|&m| m));
        let quarter = random_game(&RandomGameParams {
            hazard_fraction: 0.25,
            n_states: 8,
            ..Default::default()
        });
        assert_eq!(quarter.constraint.iter().filter(|&&h| h == -1.0).count(), 2);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = RandomGameParams {
            hazard_fraction: 1.0,
            ..Default::default()
        };
        assert!(p.check().is_err());
        let mut g = GridworldParams::new(4, 4);
        g.hazard_cells.push(g.goal_cell);
        assert!(g.check().is_err());
        assert!(GridworldParams::new(1, 4).check().is_err());
    }

    #[test]
    fn gridworld_without_hazards_uses_sentinel() {
        let spec = gridworld(&GridworldParams::new(4, 4));
        assert!(validate(&spec).passed());
        assert!(spec.constraint.iter().all(|&h| h == 7.0));
    }

    #[test]
    fn gridworld_constraint_is_chebyshev_minus_one() {
        let mut p = GridworldParams::new(4, 4);
        p.hazard_cells.push((0, 0));
        let spec = gridworld(&p);
        assert_eq!(spec.h(p.state(0, 0)), -1.0);
        assert_eq!(spec.h(p.state(1, 1)), 0.0);
        assert_eq!(spec.h(p.state(3, 1)), 2.0);
    }

    #[test]
    fn gridworld_moves_clip_and_compose() {
        let mut p = GridworldParams::new(4, 4);
        p.adversary_strength = 1;
        let spec = gridworld(&p);
        let origin = p.state(0, 0);
        // move W into the wall, then get pushed S
        assert_eq!(spec.next(origin, 4, 2), p.state(0, 1));
        // move E, pushed E
        assert_eq!(spec.next(origin, 3, 3), p.state(2, 0));
        p.adversary_strength = 0;
        let calm = gridworld(&p);
        assert_eq!(calm.next(origin, 3, 3), p.state(1, 0));
    }

    #[test]
    fn gridworld_reward_on_entering_goal() {
        let p = GridworldParams::new(3, 3);
        let spec = gridworld(&p);
        let beside = p.state(1, 2);
        assert_eq!(spec.reward(beside, 3, 0), 1.0);
        assert_eq!(spec.reward(beside, 0, 0), -0.01);
    }
}
