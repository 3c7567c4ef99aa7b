//! Dense action-value tables over `(x, u, a)`.

use std::marker::PhantomData;

use crate::game::GameSpec;

/// Marker for safety values (constraint units).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Safety;

/// Marker for discounted reward values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Perf;

/// A dense table `q(x, u, a)`, tagged by what it measures.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<K> {
    n_states: usize,
    n_u: usize,
    n_a: usize,
    values: Vec<f64>,
    _kind: PhantomData<K>,
}

pub type SafetyQ = QTable<Safety>;
pub type PerfQ = QTable<Perf>;

impl<K> QTable<K> {
    pub fn from_values(n_states: usize, n_u: usize, n_a: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_states * n_u * n_a, "table shape mismatch");
        QTable {
            n_states,
            n_u,
            n_a,
            values,
            _kind: PhantomData,
        }
    }

    pub fn constant(spec: &GameSpec, c: f64) -> Self {
        Self::from_values(spec.n_states, spec.n_u, spec.n_a, vec![c; spec.n_cells()])
    }

    pub fn zeros(spec: &GameSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    /// A table with the same shape whose entries come from `f(cell)`.
    pub fn from_fn(spec: &GameSpec, f: impl FnMut(usize) -> f64) -> Self {
        Self::from_values(
            spec.n_states,
            spec.n_u,
            spec.n_a,
            (0..spec.n_cells()).map(f).collect(),
        )
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_states, self.n_u, self.n_a)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    #[inline]
    fn idx(&self, x: usize, u: usize, a: usize) -> usize {
        (x * self.n_u + u) * self.n_a + a
    }

    #[inline]
    pub fn get(&self, x: usize, u: usize, a: usize) -> f64 {
        self.values[self.idx(x, u, a)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, u: usize, a: usize, v: f64) {
        let i = self.idx(x, u, a);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `q(x, u, ·)` over adversary actions.
    #[inline]
    pub fn row(&self, x: usize, u: usize) -> &[f64] {
        let start = self.idx(x, u, 0);
        &self.values[start..start + self.n_a]
    }

    /// All `n_u * n_a` entries of state `x`, protagonist-major.
    #[inline]
    pub fn state_block(&self, x: usize) -> &[f64] {
        let w = self.n_u * self.n_a;
        &self.values[x * w..(x + 1) * w]
    }

    /// `min_a q(x, u, a)`.
    #[inline]
    pub fn worst_case(&self, x: usize, u: usize) -> f64 {
        self.row(x, u).iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_u min_a q(x, u, a)` with the lowest maximizing `u`.
    pub fn max_min(&self, x: usize) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for u in 0..self.n_u {
            let v = self.worst_case(x, u);
            if v > best.0 {
                best = (v, u);
            }
        }
        best
    }

    pub fn max_min_values(&self) -> Vec<f64> {
        (0..self.n_states).map(|x| self.max_min(x).0).collect()
    }

    /// `||self - other||_inf`.
    pub fn sup_dist(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `min over cells of (self - other)`; nonnegative iff `self >= other` pointwise.
    pub fn min_gap(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_min_prefers_lowest_index() {
        // rows (u) with min over a: 0.3, 0.7, 0.7
        let q: SafetyQ =
            QTable::from_values(1, 3, 2, vec![0.3, 0.9, 0.7, 1.0, 0.8, 0.7]);
        assert_eq!(q.max_min(0), (0.7, 1));
        assert_eq!(q.worst_case(0, 0), 0.3);
    }

    #[test]
    fn gaps_and_distances() {
        let a: PerfQ = QTable::from_values(1, 1, 3, vec![1.0, 2.0, 3.0]);
        let b: PerfQ = QTable::from_values(1, 1, 3, vec![0.5, 2.5, 3.0]);
        assert_eq!(a.sup_dist(&b), 0.5);
        assert_eq!(a.min_gap(&b), -0.5);
    }
}
