use std::sync::Arc;
use std::time::Instant;

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::dense::gram_buffer;
use super::posterior::{build_pattern, sparse_posterior_from_matrix};
use super::{GPDataset, InferenceMode, PosteriorOptions};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::kernel::Kernel;
use crate::linalg::DenseCholesky;
use crate::points::Points;
use crate::sparse::{assemble_with, CgOptions};

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    /// Problem sizes, ascending.
    pub sizes: Vec<usize>,
    pub spacing: f64,
    pub noise: f64,
    /// Timed runs per cell after one discarded warm-up.
    pub repetitions: usize,
    /// Dense rows are produced only up to this size.
    pub dense_limit: usize,
    pub cg: CgOptions,
    pub exec: ExecMode,
    pub seed: u64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            sizes: (10..=15).map(|k| 1usize << k).collect(),
            spacing: 1.0,
            noise: 0.1,
            repetitions: 3,
            dense_limit: super::DENSE_LIMIT,
            cg: CgOptions::default(),
            exec: ExecMode::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub mode: InferenceMode,
    /// Minimum over the timed repetitions.
    pub seconds: f64,
    pub raw_seconds: Vec<f64>,
    pub nnz: usize,
    pub cg_iterations: Option<usize>,
    /// `nnz · cg_iterations / n`, the work model for the sparse path.
    pub predicted_cost: Option<f64>,
}

/// Evenly spaced series `x_i = i·spacing` with a smooth signal plus noise.
pub fn scaling_dataset(n: usize, spacing: f64, seed: u64) -> Result<GPDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * spacing).collect();
    let ys = xs
        .iter()
        .map(|x| {
            let e: f64 = StandardNormal.sample(&mut rng);
            (0.3 * x).sin() + 0.1 * e
        })
        .collect();
    GPDataset::from_1d(xs, ys)
}

fn time_reps<F: FnMut() -> Result<()>>(reps: usize, mut f: F) -> Result<Vec<f64>> {
    f()?;
    let mut out = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        f()?;
        out.push(t.elapsed().as_secs_f64());
    }
    Ok(out)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Times posterior-mean inference at the training inputs, dense and sparse.
///
/// Pattern construction and kernel-matrix formation happen outside the
/// timed region; the dense timing covers factorization and solves, the
/// sparse timing covers the CG solve and the cross-covariance product.
pub fn run_scaling<K: Kernel + ?Sized>(kernel: &K, cfg: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    let cutoff = kernel
        .support()
        .ok_or_else(|| Error::InvalidParameter("scaling runs need a compactly supported kernel".into()))?;
    if cfg.sizes.is_empty() || cfg.sizes.windows(2).any(|w| w[0] >= w[1]) || cfg.sizes[0] == 0 {
        return Err(Error::InvalidParameter("sizes must be positive and strictly ascending".into()));
    }
    if cfg.repetitions == 0 || !(cfg.spacing > 0.0) || !(cfg.noise > 0.0) {
        return Err(Error::InvalidParameter("repetitions, spacing and noise must be positive".into()));
    }
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let data = scaling_dataset(n, cfg.spacing, cfg.seed)?;
        let pattern = Arc::new(build_pattern(data.x(), cutoff)?);
        let mat = assemble_with(kernel, data.x(), pattern, cfg.noise, cfg.exec)?;
        let query: Points = data.x().clone();
        let opts = PosteriorOptions {
            mode: InferenceMode::Sparse,
            cg: cfg.cg,
            jacobi: false,
            mean_only: true,
            exec: cfg.exec,
            dense_limit: cfg.dense_limit,
        };
        let mut iters = 0;
        let raw = time_reps(cfg.repetitions, || {
            let res = sparse_posterior_from_matrix(kernel, &mat, &data, &query, &opts)?;
            iters = res.cg.map(|c| c.total_iterations).unwrap_or(0);
            Ok(())
        })?;
        let nnz = mat.nnz();
        rows.push(ScalingRow {
            n,
            mode: InferenceMode::Sparse,
            seconds: min_of(&raw),
            raw_seconds: raw,
            nnz,
            cg_iterations: Some(iters),
            predicted_cost: Some(nnz as f64 * iters as f64 / n as f64),
        });

        if n <= cfg.dense_limit {
            let gram = gram_buffer(kernel, data.x(), cfg.noise, cfg.exec);
            let gram = MatRef::from_column_major_slice(&gram, n, n);
            let y = MatRef::from_column_major_slice(data.y(), n, 1);
            let raw = time_reps(cfg.repetitions, || {
                let chol = DenseCholesky::factor(gram)?;
                let mut alpha = y.to_owned();
                chol.solve_in_place(&mut alpha);
                // cross-covariance at the training inputs is K - noise·I
                let mut mean: Mat<f64> = gram * &alpha;
                for i in 0..n {
                    mean[(i, 0)] -= cfg.noise * alpha[(i, 0)];
                }
                std::hint::black_box(mean);
                Ok(())
            })?;
            rows.push(ScalingRow {
                n,
                mode: InferenceMode::Dense,
                seconds: min_of(&raw),
                raw_seconds: raw,
                nnz: n * n,
                cg_iterations: None,
                predicted_cost: None,
            });
        }
    }
    Ok(rows)
}
