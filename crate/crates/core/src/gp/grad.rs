use faer::MatRef;

use super::dense::{check_noise, nll_from_factor};
use super::posterior::cg_solve;
use super::{GPDataset, PairTable};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::kernel::CompactKernel;
use crate::linalg::DenseCholesky;
use crate::sparse::{hutchinson_traces, CgOptions, SparseKernelMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceMode {
    /// `tr(K⁻¹∂K)` from the dense inverse.
    Exact,
    /// Stochastic estimate with Gaussian probes; solves by CG.
    Hutchinson { probes: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct GradOptions {
    pub trace: TraceMode,
    pub cg: CgOptions,
    pub jacobi: bool,
    pub exec: ExecMode,
    pub dense_limit: usize,
}

impl Default for GradOptions {
    fn default() -> Self {
        GradOptions {
            trace: TraceMode::Exact,
            cg: CgOptions::default(),
            jacobi: false,
            exec: ExecMode::default(),
            dense_limit: super::DENSE_LIMIT,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NllGradient {
    /// `dNLL/dA_ij`, entries treated as independent; symmetric.
    pub a: Vec<f64>,
    /// `dNLL/dσ_n²`.
    pub noise: f64,
    /// The NLL itself, when a dense factorization was available.
    pub nll: Option<f64>,
    pub cg_iterations: usize,
    /// Standard errors of the trace estimates, `M² + 1` values (noise last),
    /// in Hutchinson mode.
    pub trace_standard_errors: Option<Vec<f64>>,
}

/// Gradient of the negative log likelihood with respect to `A` and `σ_n²`:
/// `-½ αᵀ∂Kα + ½ tr(K⁻¹∂K)` with `α = K⁻¹y`.
pub fn nll_grad_a(kernel: &CompactKernel, data: &GPDataset, noise: f64, opts: &GradOptions) -> Result<NllGradient> {
    check_noise(noise)?;
    let table = PairTable::new(kernel.phi(), kernel.cutoff(), data.x(), opts.exec)?;
    grad_with_table(&table, kernel.a(), noise, data.y(), opts)
}

pub(crate) fn grad_with_table(
    table: &PairTable,
    a: &[f64],
    noise: f64,
    y: &[f64],
    opts: &GradOptions,
) -> Result<NllGradient> {
    let mat = table.assemble(a, noise, opts.exec);
    match opts.trace {
        TraceMode::Exact => exact(table, &mat, a, y, opts),
        TraceMode::Hutchinson { probes, seed } => stochastic(table, &mat, a, y, probes, seed, opts),
    }
}

pub(crate) fn dense_factor(mat: &SparseKernelMatrix, dense_limit: usize) -> Result<DenseCholesky> {
    let n = mat.n();
    if n > dense_limit {
        return Err(Error::InvalidParameter(format!("n = {n} exceeds the dense limit {dense_limit}")));
    }
    let mut buf = vec![0.0; n * n];
    let offsets = mat.pattern().row_offsets();
    for (i, chunk) in buf.chunks_mut(n).enumerate() {
        for (k, &j) in mat.pattern().row(i).iter().enumerate() {
            chunk[j] = mat.values()[offsets[i] + k];
        }
    }
    // symmetric, so the row-major fill is also column-major
    DenseCholesky::factor(MatRef::from_column_major_slice(&buf, n, n))
}

fn exact(table: &PairTable, mat: &SparseKernelMatrix, a: &[f64], y: &[f64], opts: &GradOptions) -> Result<NllGradient> {
    let chol = dense_factor(mat, opts.dense_limit)?;
    let (nll, alpha) = nll_from_factor(&chol, y);
    let kinv = chol.inverse();
    let g = table.contract(a, |r, c| 0.5 * (kinv[(r, c)] - alpha[r] * alpha[c]));
    let tr: f64 = (0..mat.n()).map(|i| kinv[(i, i)]).sum();
    let a2: f64 = alpha.iter().map(|v| v * v).sum();
    Ok(NllGradient {
        a: g,
        noise: 0.5 * tr - 0.5 * a2,
        nll: Some(nll),
        cg_iterations: 0,
        trace_standard_errors: None,
    })
}

fn stochastic(
    table: &PairTable,
    mat: &SparseKernelMatrix,
    a: &[f64],
    y: &[f64],
    probes: usize,
    seed: u64,
    opts: &GradOptions,
) -> Result<NllGradient> {
    let (alpha, stats) = cg_solve(mat, y, &opts.cg, opts.jacobi, opts.exec)?;
    let quad = table.contract(a, |r, c| alpha[r] * alpha[c]);
    let m2 = a.len();
    let iters = std::sync::atomic::AtomicUsize::new(0);
    let traces = hutchinson_traces(
        mat.n(),
        m2 + 1,
        |b| {
            let (u, st) = cg_solve(mat, b, &opts.cg, opts.jacobi, ExecMode::Sequential)?;
            iters.fetch_add(st.iterations, std::sync::atomic::Ordering::Relaxed);
            Ok(u)
        },
        |u, b| {
            // symmetrized ⟨u, P b⟩ has the same mean and lower variance
            let mut v = table.contract(a, |r, c| 0.5 * (u[r] * b[c] + u[c] * b[r]));
            v.push(u.iter().zip(b).map(|(x, y)| x * y).sum());
            v
        },
        probes,
        seed,
        opts.exec,
    )?;
    let g: Vec<f64> = (0..m2).map(|k| 0.5 * traces[k].estimate - 0.5 * quad[k]).collect();
    let a2: f64 = alpha.iter().map(|v| v * v).sum();
    Ok(NllGradient {
        a: g,
        noise: 0.5 * traces[m2].estimate - 0.5 * a2,
        nll: None,
        cg_iterations: stats.iterations + iters.into_inner(),
        trace_standard_errors: Some(traces.iter().map(|t| 0.5 * t.standard_error).collect()),
    })
}
