//! Sup-norm fixed-point iteration for contraction operators on Q tables.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::qtable::QTable;

/// Cell count above which sweeps are split across the rayon pool.
pub const PARALLEL_CELLS: usize = 4096;

/// A monotone sup-norm contraction on `QTable<K>`.
pub trait Operator<K> {
    fn apply(&self, q: &QTable<K>) -> QTable<K>;

    /// Contraction modulus in the sup norm.
    fn rate(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-10,
            max_iter: 200_000,
        }
    }
}

impl SolverSettings {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        SolverSettings { tol, max_iter }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint<K> {
    pub q: QTable<K>,
    /// `||T(q_prev) - q_prev||_inf` for the last sweep; `q = T(q_prev)`.
    pub residual: f64,
    pub iters: usize,
    /// Guaranteed `||q - q*||_inf <= rate * residual / (1 - rate)`.
    pub error_bound: f64,
}

/// Iterates `q <- T(q)` until one sweep moves the table by at most `tol`.
pub fn fixed_point<K, T: Operator<K> + ?Sized>(
    op: &T,
    q0: QTable<K>,
    settings: SolverSettings,
) -> Result<FixedPoint<K>> {
    if !(settings.tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be positive, got {}",
            settings.tol
        )));
    }
    let rate = op.rate();
    let mut q = q0;
    let mut residual = f64::INFINITY;
    for iter in 1..=settings.max_iter {
        let next = op.apply(&q);
        residual = next.sup_dist(&q);
        q = next;
        if residual <= settings.tol {
            return Ok(FixedPoint {
                q,
                residual,
                iters: iter,
                error_bound: rate * residual / (1.0 - rate),
            });
        }
    }
    Err(Error::MaxIterExceeded {
        residual,
        tol: settings.tol,
        iters: settings.max_iter,
    })
}

/// Evaluates `f` on every cell of the game, in parallel for large tables.
pub(crate) fn sweep<K, F>(spec: &GameSpec, f: F) -> QTable<K>
where
    F: Fn(usize) -> f64 + Sync,
{
    let n = spec.n_cells();
    let values: Vec<f64> = if n >= PARALLEL_CELLS {
        (0..n).into_par_iter().map(&f).collect()
    } else {
        (0..n).map(&f).collect()
    };
    QTable::from_values(spec.n_states, spec.n_u, spec.n_a, values)
}

/// Evaluates `f` on every state, in parallel for large tables.
pub(crate) fn per_state<F>(spec: &GameSpec, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    if spec.n_cells() >= PARALLEL_CELLS {
        (0..spec.n_states).into_par_iter().map(&f).collect()
    } else {
        (0..spec.n_states).map(&f).collect()
    }
}
