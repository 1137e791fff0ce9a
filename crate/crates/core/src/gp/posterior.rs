use std::sync::Arc;

use faer::{Mat, MatRef};
use serde::Serialize;

use super::dense::{check_noise, gram_buffer};
use super::{neighbors, GPDataset};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::kernel::{tensor_product_unchecked, Kernel};
use crate::linalg::DenseCholesky;
use crate::points::{offset_into, Points};
use crate::sparse::{
    assemble_with, conjugate_gradient, sparsity_pattern_generic, sparsity_pattern_sorted, CgOptions, CgStats,
    Preconditioner, SparseKernelMatrix, SparsityPattern,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    Dense,
    Sparse,
}

impl std::str::FromStr for InferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" => Ok(InferenceMode::Dense),
            "sparse" => Ok(InferenceMode::Sparse),
            _ => Err(Error::InvalidParameter(format!("unknown inference mode '{s}'"))),
        }
    }
}

impl std::fmt::Display for InferenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InferenceMode::Dense => "dense",
            InferenceMode::Sparse => "sparse",
        })
    }
}

#[derive(Debug, Clone)]
pub struct PosteriorOptions {
    pub mode: InferenceMode,
    pub cg: CgOptions,
    pub jacobi: bool,
    /// Skip the variance; `PosteriorResult::variance` is then empty.
    pub mean_only: bool,
    pub exec: ExecMode,
    pub dense_limit: usize,
}

impl Default for PosteriorOptions {
    fn default() -> Self {
        PosteriorOptions {
            mode: InferenceMode::Dense,
            cg: CgOptions::default(),
            jacobi: false,
            mean_only: false,
            exec: ExecMode::default(),
            dense_limit: super::DENSE_LIMIT,
        }
    }
}

impl PosteriorOptions {
    pub fn sparse() -> Self {
        PosteriorOptions {
            mode: InferenceMode::Sparse,
            ..Default::default()
        }
    }
}

/// Aggregate statistics over every CG solve of a posterior call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CgSummary {
    pub solves: usize,
    pub total_iterations: usize,
    /// Iterations of the `K⁻¹y` solve alone.
    pub mean_solve_iterations: usize,
    pub max_relative_residual: f64,
    pub nnz: usize,
}

impl CgSummary {
    fn add(&mut self, s: &CgStats) {
        self.solves += 1;
        self.total_iterations += s.iterations;
        self.max_relative_residual = self.max_relative_residual.max(s.final_residual_norm);
    }
}

#[derive(Debug, Clone)]
pub struct PosteriorResult {
    pub mean: Vec<f64>,
    /// Latent (noise-free) marginal variance at each query.
    pub variance: Vec<f64>,
    pub cg: Option<CgSummary>,
}

/// Posterior mean `K'K⁻¹y` and variance `diag(K'' - K'K⁻¹K'ᵀ)` at `query`.
pub fn posterior<K: Kernel + ?Sized>(
    kernel: &K,
    train: &GPDataset,
    query: &Points,
    noise: f64,
    opts: &PosteriorOptions,
) -> Result<PosteriorResult> {
    check_noise(noise)?;
    if !query.is_empty() && query.dim() != train.x().dim() {
        return Err(Error::DimensionMismatch {
            expected: train.x().dim(),
            got: query.dim(),
        });
    }
    let mut res = match opts.mode {
        InferenceMode::Dense => posterior_dense(kernel, train, query, noise, opts)?,
        InferenceMode::Sparse => posterior_sparse(kernel, train, query, noise, opts)?,
    };
    let k0 = prior_variance(kernel, train.x().dim());
    for v in res.variance.iter_mut() {
        if *v < 0.0 && *v >= -1e-8 * k0 {
            *v = 0.0;
        }
    }
    Ok(res)
}

fn prior_variance<K: Kernel + ?Sized>(kernel: &K, dim: usize) -> f64 {
    tensor_product_unchecked(kernel, &vec![0.0; dim.max(1)])
}

fn posterior_dense<K: Kernel + ?Sized>(
    kernel: &K,
    train: &GPDataset,
    query: &Points,
    noise: f64,
    opts: &PosteriorOptions,
) -> Result<PosteriorResult> {
    let n = train.len();
    if n > opts.dense_limit {
        return Err(Error::InvalidParameter(format!(
            "n = {n} exceeds the dense limit {}",
            opts.dense_limit
        )));
    }
    let buf = gram_buffer(kernel, train.x(), noise, opts.exec);
    let chol = DenseCholesky::factor(MatRef::from_column_major_slice(&buf, n, n))?;
    drop(buf);
    let alpha = chol.solve(train.y());
    let q = query.len();
    let dim = train.x().dim();
    let k0 = prior_variance(kernel, dim);

    let cross_row = |qi: usize| -> Vec<f64> {
        let mut off = vec![0.0; dim];
        (0..n)
            .map(|j| {
                offset_into(query.point(qi), train.x().point(j), &mut off);
                tensor_product_unchecked(kernel, &off)
            })
            .collect()
    };
    let mean = exec::map_range(opts.exec, q, |qi| {
        cross_row(qi).iter().zip(&alpha).map(|(a, b)| a * b).sum()
    });
    let mut variance = Vec::new();
    if !opts.mean_only {
        variance.reserve(q);
        const BLOCK: usize = 256;
        for start in (0..q).step_by(BLOCK) {
            let end = (start + BLOCK).min(q);
            let rows = exec::map_range(opts.exec, end - start, |k| cross_row(start + k));
            let mut v = Mat::from_fn(n, end - start, |i, k| rows[k][i]);
            chol.solve_lower_in_place(&mut v);
            for k in 0..end - start {
                let s: f64 = (0..n).map(|i| v[(i, k)] * v[(i, k)]).sum();
                variance.push(k0 - s);
            }
        }
    }
    Ok(PosteriorResult {
        mean,
        variance,
        cg: None,
    })
}

/// Training-set sparsity pattern: the sorted 1-D sweep when possible, the generic search otherwise.
pub fn build_pattern(x: &Points, cutoff: f64) -> Result<SparsityPattern> {
    if x.dim() == 1 {
        sparsity_pattern_sorted(x.coords(), cutoff)
    } else {
        sparsity_pattern_generic(x, cutoff)
    }
}

pub(crate) fn cg_solve(
    mat: &SparseKernelMatrix,
    b: &[f64],
    opts: &CgOptions,
    jacobi: bool,
    exec: ExecMode,
) -> Result<(Vec<f64>, CgStats)> {
    let pc = if jacobi {
        Preconditioner::Jacobi(mat.diagonal())
    } else {
        Preconditioner::None
    };
    let (x, stats) = conjugate_gradient(mat.operator(exec), b, opts, &pc)?;
    if !stats.converged {
        return Err(Error::CgNotConverged(stats));
    }
    Ok((x, stats))
}

fn posterior_sparse<K: Kernel + ?Sized>(
    kernel: &K,
    train: &GPDataset,
    query: &Points,
    noise: f64,
    opts: &PosteriorOptions,
) -> Result<PosteriorResult> {
    let cutoff = kernel
        .support()
        .ok_or_else(|| Error::InvalidParameter("sparse inference needs a compactly supported kernel".into()))?;
    let pattern = Arc::new(build_pattern(train.x(), cutoff)?);
    let mat = assemble_with(kernel, train.x(), pattern, noise, opts.exec)?;
    sparse_posterior_from_matrix(kernel, &mat, train, query, opts)
}

/// Sparse-path posterior given an already assembled training matrix.
pub fn sparse_posterior_from_matrix<K: Kernel + ?Sized>(
    kernel: &K,
    mat: &SparseKernelMatrix,
    train: &GPDataset,
    query: &Points,
    opts: &PosteriorOptions,
) -> Result<PosteriorResult> {
    let cutoff = kernel.support().unwrap_or(f64::INFINITY);
    let dim = train.x().dim();
    let k0 = prior_variance(kernel, dim);
    // inner solves stay sequential when the per-query loop is parallel
    let (alpha, stats) = cg_solve(mat, train.y(), &opts.cg, opts.jacobi, opts.exec)?;
    let mut summary = CgSummary {
        nnz: mat.nnz(),
        mean_solve_iterations: stats.iterations,
        ..Default::default()
    };
    summary.add(&stats);

    let sorted = train.x().is_sorted_1d();
    let cross = |qi: usize| -> (Vec<usize>, Vec<f64>) {
        let idx = neighbors(train.x(), sorted, query.point(qi), cutoff);
        let mut off = vec![0.0; dim];
        let vals = idx
            .iter()
            .map(|&j| {
                offset_into(query.point(qi), train.x().point(j), &mut off);
                tensor_product_unchecked(kernel, &off)
            })
            .collect();
        (idx, vals)
    };
    let q = query.len();
    let mean = exec::map_range(opts.exec, q, |qi| {
        let (idx, vals) = cross(qi);
        idx.iter().zip(&vals).map(|(&j, v)| v * alpha[j]).sum()
    });

    let mut variance = Vec::new();
    if !opts.mean_only {
        let n = train.len();
        let per_query = exec::map_range(opts.exec, q, |qi| -> Result<(f64, Option<CgStats>)> {
            let (idx, vals) = cross(qi);
            if idx.is_empty() {
                return Ok((k0, None));
            }
            let mut rhs = vec![0.0; n];
            for (&j, v) in idx.iter().zip(&vals) {
                rhs[j] = *v;
            }
            let (sol, st) = cg_solve(mat, &rhs, &opts.cg, opts.jacobi, ExecMode::Sequential)?;
            let reduction: f64 = idx.iter().zip(&vals).map(|(&j, v)| v * sol[j]).sum();
            Ok((k0 - reduction, Some(st)))
        });
        variance.reserve(q);
        for r in per_query {
            let (v, st) = r?;
            if let Some(st) = st {
                summary.add(&st);
            }
            variance.push(v);
        }
    }
    Ok(PosteriorResult {
        mean,
        variance,
        cg: Some(summary),
    })
}
