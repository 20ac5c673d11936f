//! Rectangular neuron lattice shared by the growing grid and the SOM.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::{sq_dist, uniform_unit, Real};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NetError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("input has dimension {got}, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("network is frozen")]
    Frozen,
    #[error("operation requires the {expected} phase, network is in {actual}")]
    WrongPhase {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("input stream ended after {signals} signals with the grid at {rows}x{cols}, still growing; supply more epochs")]
    GrowthIncomplete {
        signals: usize,
        rows: usize,
        cols: usize,
    },
    #[error("insertion interval is not set")]
    LambdaUnset,
    #[error("no input signals")]
    EmptyInput,
}

/// Winner of one competition: lattice position, Euclidean net input `s`
/// and activity `y = exp(-s/σ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WinnerResult<T> {
    pub row: usize,
    pub col: usize,
    pub distance: T,
    pub activity: T,
}

/// Exponential interpolation from `start` to `end` over a horizon.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decay<T> {
    pub start: T,
    pub end: T,
}

impl<T: Real> Decay<T> {
    pub fn constant(v: T) -> Self {
        Decay { start: v, end: v }
    }

    /// Value after `step` of `horizon` steps; `start · (end/start)^(step/horizon)`.
    pub fn at(&self, step: usize, horizon: usize) -> T {
        if horizon == 0 || self.start == self.end || self.start == T::zero() {
            return self.start;
        }
        let frac = T::from_usize_lossy(step.min(horizon)) / T::from_usize_lossy(horizon);
        self.start * (self.end / self.start).powf(frac)
    }

    pub(crate) fn validate(&self, what: &str) -> Result<(), NetError> {
        let ok = self.start.is_finite()
            && self.end.is_finite()
            && self.start >= T::zero()
            && self.end >= T::zero();
        let both_or_neither_zero = (self.start == T::zero()) == (self.end == T::zero());
        if ok && both_or_neither_zero {
            Ok(())
        } else {
            Err(NetError::InvalidConfig(format!(
                "{what} decay {}→{} must be finite, non-negative, and zero at both ends or neither",
                self.start, self.end
            )))
        }
    }
}

/// Row-major `rows × cols` grid of weight vectors of length `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice<T> {
    rows: usize,
    cols: usize,
    dim: usize,
    weights: Vec<T>,
}

impl<T: Real> Lattice<T> {
    pub fn random(rows: usize, cols: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..rows * cols * dim)
            .map(|_| uniform_unit(&mut rng))
            .collect();
        Lattice {
            rows,
            cols,
            dim,
            weights,
        }
    }

    pub fn from_weights(
        rows: usize,
        cols: usize,
        dim: usize,
        weights: Vec<T>,
    ) -> Result<Self, NetError> {
        if rows == 0 || cols == 0 || dim == 0 || weights.len() != rows * cols * dim {
            return Err(NetError::InvalidConfig(format!(
                "{} weights do not fill a {rows}x{cols} lattice of dimension {dim}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(NetError::InvalidConfig("non-finite weight".into()));
        }
        Ok(Lattice {
            rows,
            cols,
            dim,
            weights,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    pub fn weight(&self, row: usize, col: usize) -> &[T] {
        let i = self.index(row, col) * self.dim;
        &self.weights[i..i + self.dim]
    }

    pub fn weight_mut(&mut self, row: usize, col: usize) -> &mut [T] {
        let i = self.index(row, col) * self.dim;
        &mut self.weights[i..i + self.dim]
    }

    /// In-lattice four-neighbourhood, in row-major order.
    pub fn neighbors(&self, row: usize, col: usize) -> impl Iterator<Item = (usize, usize)> {
        let (rows, cols) = (self.rows, self.cols);
        [
            (row > 0).then(|| (row - 1, col)),
            (col > 0).then(|| (row, col - 1)),
            (col + 1 < cols).then(|| (row, col + 1)),
            (row + 1 < rows).then(|| (row + 1, col)),
        ]
        .into_iter()
        .flatten()
    }

    pub fn check_dim(&self, x: &[T]) -> Result<(), NetError> {
        if x.len() == self.dim {
            Ok(())
        } else {
            Err(NetError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            })
        }
    }

    /// Nearest neuron; the first in row-major order wins ties.
    pub fn find_winner(&self, x: &[T], sigma: T) -> Result<WinnerResult<T>, NetError> {
        self.check_dim(x)?;
        let mut best = 0;
        let mut best_sq = T::infinity();
        for (i, w) in self.weights.chunks_exact(self.dim).enumerate() {
            let d = sq_dist(x, w);
            if d < best_sq {
                best_sq = d;
                best = i;
            }
        }
        let (row, col) = self.position(best);
        let distance = best_sq.sqrt();
        Ok(WinnerResult {
            row,
            col,
            distance,
            activity: (-distance / sigma).exp(),
        })
    }

    /// Euclidean distance from `x` to every neuron, row-major.
    pub fn distances(&self, x: &[T]) -> Result<Vec<T>, NetError> {
        self.check_dim(x)?;
        Ok(self
            .weights
            .chunks_exact(self.dim)
            .map(|w| sq_dist(x, w).sqrt())
            .collect())
    }

    /// Moves neuron `(row, col)` toward `x` by `alpha`.
    pub fn pull(&mut self, row: usize, col: usize, x: &[T], alpha: T) {
        for (w, &xi) in self.weight_mut(row, col).iter_mut().zip(x) {
            *w = *w + alpha * (xi - *w);
        }
    }

    /// Inserts a column between `left` and `left + 1`, each new weight the
    /// mean of its two horizontal neighbours.
    pub fn insert_column(&mut self, left: usize) {
        assert!(
            left + 1 < self.cols,
            "column insertion needs two flanking columns"
        );
        let (rows, cols, dim) = (self.rows, self.cols, self.dim);
        let two = T::lit(2.0);
        let mut out = Vec::with_capacity(rows * (cols + 1) * dim);
        for r in 0..rows {
            for c in 0..cols {
                out.extend_from_slice(self.weight(r, c));
                if c == left {
                    let (a, b) = (self.weight(r, c), self.weight(r, c + 1));
                    out.extend(a.iter().zip(b).map(|(&p, &q)| (p + q) / two));
                }
            }
        }
        self.cols += 1;
        self.weights = out;
    }

    /// Inserts a row between `top` and `top + 1`, each new weight the mean
    /// of its two vertical neighbours.
    pub fn insert_row(&mut self, top: usize) {
        assert!(top + 1 < self.rows, "row insertion needs two flanking rows");
        let two = T::lit(2.0);
        let stride = self.cols * self.dim;
        let at = (top + 1) * stride;
        let new_row: Vec<T> = self.weights[top * stride..at]
            .iter()
            .zip(&self.weights[at..at + stride])
            .map(|(&p, &q)| (p + q) / two)
            .collect();
        self.weights.splice(at..at, new_row);
        self.rows += 1;
    }
}

/// Winner/activity interface shared by every trained map.
pub trait NeuronMap<T: Real> {
    fn lattice(&self) -> &Lattice<T>;

    /// Exponential activity factor σ.
    fn sigma(&self) -> T;

    fn rows(&self) -> usize {
        self.lattice().rows()
    }

    fn cols(&self) -> usize {
        self.lattice().cols()
    }

    fn input_dim(&self) -> usize {
        self.lattice().dim()
    }

    fn find_winner(&self, x: &[T]) -> Result<WinnerResult<T>, NetError> {
        self.lattice().find_winner(x, self.sigma())
    }

    /// Activities `exp(-s/σ)` of all neurons, row-major.
    fn activities(&self, x: &[T]) -> Result<Vec<T>, NetError> {
        let sigma = self.sigma();
        Ok(self
            .lattice()
            .distances(x)?
            .into_iter()
            .map(|s| (-s / sigma).exp())
            .collect())
    }

    /// Activities raised to `exponent` and normalized to unit sum. The
    /// argmax is that of the raw activities.
    fn contrast_activities(&self, x: &[T], exponent: T) -> Result<Vec<T>, NetError> {
        let sigma = self.sigma();
        let s = self.lattice().distances(x)?;
        let s_min = s.iter().copied().fold(T::infinity(), T::min);
        // y^p / Σ y^p with y = exp(-s/σ), shifted by the minimum to stay in range.
        let mut a: Vec<T> = s
            .iter()
            .map(|&d| (-(exponent * (d - s_min)) / sigma).exp())
            .collect();
        let total: T = a.iter().copied().sum();
        for v in &mut a {
            *v = *v / total;
        }
        Ok(a)
    }
}
