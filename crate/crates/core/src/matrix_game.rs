//! Row-restricted zero-sum matrix games solved by a dense simplex.
//!
//! The row player (protagonist) maximizes, the column player (adversary)
//! minimizes. Only `admissible_rows` may carry mass. After shifting the
//! payoff so every entry is at least 1, the column player's LP
//!
//! ```text
//! max 1ᵀy   s.t.  A y <= 1,  y >= 0
//! ```
//!
//! is solved with Bland's rule from the slack basis. Its optimal dual prices
//! are the row player's LP solution, so one tableau yields both strategies;
//! normalizing by `1ᵀy` recovers the mixed strategies and the game value.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;

/// Gap above which a solution is rejected as numerically unreliable.
pub const CERTIFICATION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedMatrixGame {
    n_rows: usize,
    n_cols: usize,
    payoff: Vec<f64>,
    admissible_rows: Vec<usize>,
}

impl RestrictedMatrixGame {
    pub fn new(payoff: Vec<Vec<f64>>, admissible_rows: Vec<usize>) -> Result<Self> {
        let n_rows = payoff.len();
        let n_cols = payoff.first().map_or(0, |r| r.len());
        if n_rows == 0 || n_cols == 0 || payoff.iter().any(|r| r.len() != n_cols) {
            return Err(Error::InvalidConfig("payoff must be a nonempty rectangular matrix".into()));
        }
        let flat: Vec<f64> = payoff.into_iter().flatten().collect();
        Self::from_flat(flat, n_rows, n_cols, admissible_rows)
    }

    /// All rows admissible.
    pub fn full(payoff: Vec<Vec<f64>>) -> Result<Self> {
        let rows = (0..payoff.len()).collect();
        Self::new(payoff, rows)
    }

    pub fn from_flat(
        payoff: Vec<f64>,
        n_rows: usize,
        n_cols: usize,
        admissible_rows: Vec<usize>,
    ) -> Result<Self> {
        check_inputs(&payoff, n_rows, n_cols, &admissible_rows)?;
        Ok(RestrictedMatrixGame {
            n_rows,
            n_cols,
            payoff,
            admissible_rows,
        })
    }

    pub fn payoff(&self, row: usize, col: usize) -> f64 {
        self.payoff[row * self.n_cols + col]
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn admissible_rows(&self) -> &[usize] {
        &self.admissible_rows
    }

    pub fn solve(&self) -> Result<MatrixGameSolution> {
        solve_block(&self.payoff, self.n_rows, self.n_cols, &self.admissible_rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    /// Distribution over all rows; zero on inadmissible rows.
    pub strategy: Vec<f64>,
    /// Guaranteed payoff of `strategy`: `min_a Σ_u strategy(u) payoff(u, a)`.
    pub value: f64,
    /// Certifying column mixture.
    pub column_strategy: Vec<f64>,
    /// `max_u Σ_a column(a) payoff(u, a) - value`, over admissible rows.
    pub gap: f64,
}

fn check_inputs(payoff: &[f64], n_rows: usize, n_cols: usize, rows: &[usize]) -> Result<()> {
    if payoff.len() != n_rows * n_cols || n_cols == 0 {
        return Err(Error::InvalidConfig("payoff shape mismatch".into()));
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig("admissible row set is empty".into()));
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= n_rows) {
        return Err(Error::InvalidConfig(format!("admissible row {r} out of range")));
    }
    if payoff.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("payoff has non-finite entries".into()));
    }
    Ok(())
}

/// Solves the game on a row-major `n_rows x n_cols` payoff block.
pub fn solve_block(
    payoff: &[f64],
    n_rows: usize,
    n_cols: usize,
    admissible: &[usize],
) -> Result<MatrixGameSolution> {
    check_inputs(payoff, n_rows, n_cols, admissible)?;
    let at = |r: usize, c: usize| payoff[r * n_cols + c];

    let (row_mix, col_mix) = if admissible.len() == 1 {
        // single row: the adversary answers with its best column
        let r = admissible[0];
        let c = argmin((0..n_cols).map(|c| at(r, c)));
        (vec![1.0], unit(n_cols, c))
    } else if n_cols == 1 {
        let i = argmax(admissible.iter().map(|&r| at(r, 0)));
        (unit(admissible.len(), i), vec![1.0])
    } else {
        simplex(payoff, n_cols, admissible)
    };

    let mut strategy = vec![0.0; n_rows];
    for (&r, &p) in admissible.iter().zip(&row_mix) {
        strategy[r] = p;
    }
    let value = (0..n_cols)
        .map(|c| admissible.iter().map(|&r| strategy[r] * at(r, c)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let upper = admissible
        .iter()
        .map(|&r| (0..n_cols).map(|c| col_mix[c] * at(r, c)).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = upper - value;
    if !(gap <= CERTIFICATION_LIMIT) {
        return Err(Error::NumericalFailure { gap });
    }
    Ok(MatrixGameSolution {
        strategy,
        value,
        column_strategy: col_mix,
        gap: gap.max(0.0),
    })
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn argmin(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, v) in it.enumerate() {
        if v < best.0 {
            best = (v, i);
        }
    }
    best.1
}

fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in it.enumerate() {
        if v > best.0 {
            best = (v, i);
        }
    }
    best.1
}

/// Returns (row mixture over `rows`, column mixture).
fn simplex(payoff: &[f64], n_cols: usize, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let m = rows.len();
    let n = n_cols;
    let min = rows
        .iter()
        .flat_map(|&r| payoff[r * n..(r + 1) * n].iter().copied())
        .fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;

    // Variables: y_0..y_{n-1}, then slacks s_0..s_{m-1}.
    let width = n + m;
    let mut tab = vec![0.0; m * width];
    let mut rhs = vec![1.0; m];
    for (i, &r) in rows.iter().enumerate() {
        for c in 0..n {
            tab[i * width + c] = payoff[r * n + c] + shift;
        }
        tab[i * width + n + i] = 1.0;
    }
    let mut reduced: Vec<f64> = (0..width).map(|j| if j < n { 1.0 } else { 0.0 }).collect();
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Bland's rule terminates; the cap only guards against float pathologies.
    let max_pivots = 50 * (width + 1) * (m + 1);
    for _ in 0..max_pivots {
        let Some(enter) = (0..width).find(|&j| reduced[j] > PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = tab[i * width + enter];
            if coef > PIVOT_EPS {
                let ratio = rhs[i] / coef;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_EPS
                            || (ratio <= lr + PIVOT_EPS && basis[i] < basis[li])
                        {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        // A y <= 1 with A > 0 keeps every column bounded.
        let (pr, _) = leave.expect("bounded LP");
        let piv = tab[pr * width + enter];
        for k in 0..width {
            tab[pr * width + k] /= piv;
        }
        rhs[pr] /= piv;
        for i in 0..m {
            if i == pr {
                continue;
            }
            let f = tab[i * width + enter];
            if f != 0.0 {
                for k in 0..width {
                    tab[i * width + k] -= f * tab[pr * width + k];
                }
                rhs[i] -= f * rhs[pr];
            }
        }
        let f = reduced[enter];
        for k in 0..width {
            reduced[k] -= f * tab[pr * width + k];
        }
        basis[pr] = enter;
    }

    let mut y = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            y[b] = rhs[i].max(0.0);
        }
    }
    let x: Vec<f64> = (0..m).map(|i| (-reduced[n + i]).max(0.0)).collect();
    (normalize(x), normalize(y))
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|p| *p /= total);
    } else {
        let k = v.len() as f64;
        v.iter_mut().for_each(|p| *p = 1.0 / k);
    }
    v
}
