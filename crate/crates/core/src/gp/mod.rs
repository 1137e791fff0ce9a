//! Zero-mean GP regression: likelihood, posterior, gradients and fitting.

mod dense;
mod fit;
mod grad;
mod metrics;
mod posterior;
mod sample;
mod scaling;
mod table;

pub use dense::{gram_dense, nll_dense, nll_dense_with};
pub use fit::{fit_mle, CutoffSummary, FitConfig, FitReport, NoiseModel};
pub use grad::{nll_grad_a, GradOptions, NllGradient, TraceMode};
pub use metrics::{metrics, Metrics};
pub use posterior::{build_pattern, posterior, sparse_posterior_from_matrix, CgSummary, InferenceMode, PosteriorOptions, PosteriorResult};
pub use sample::sample_gp;
pub use scaling::{run_scaling, scaling_dataset, ScalingConfig, ScalingRow};
pub use table::PairTable;

use crate::error::{Error, Result};
use crate::points::Points;

/// Largest `n` for which dense Cholesky paths run.
pub const DENSE_LIMIT: usize = 8192;

#[derive(Debug, Clone)]
pub struct GPDataset {
    x: Points,
    y: Vec<f64>,
}

impl GPDataset {
    pub fn new(x: Points, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("outputs must be finite".into()));
        }
        Ok(GPDataset { x, y })
    }

    pub fn from_1d(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(Points::from_1d(x)?, y)
    }

    pub fn x(&self) -> &Points {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// True for one-dimensional inputs in ascending order.
    pub fn is_sorted(&self) -> bool {
        self.x.is_sorted_1d()
    }

    /// Population variance of `y`.
    pub fn y_variance(&self) -> f64 {
        let n = self.y.len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let mean = self.y.iter().sum::<f64>() / n;
        self.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }
}

/// Indices of training points strictly within `cutoff` (uniform norm) of `q`.
/// `sorted` selects the binary search; callers check it once per batch.
pub(crate) fn neighbors(train: &Points, sorted: bool, q: &[f64], cutoff: f64) -> Vec<usize> {
    if sorted {
        let xs = train.coords();
        let lo = xs.partition_point(|&x| x <= q[0] - cutoff);
        let hi = xs.partition_point(|&x| x < q[0] + cutoff);
        (lo..hi).filter(|&j| (xs[j] - q[0]).abs() < cutoff).collect()
    } else {
        (0..train.len())
            .filter(|&j| {
                train
                    .point(j)
                    .iter()
                    .zip(q)
                    .all(|(a, b)| (a - b).abs() < cutoff)
            })
            .collect()
    }
}
