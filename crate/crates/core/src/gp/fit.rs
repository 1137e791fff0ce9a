use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::dense::nll_from_factor;
use super::grad::{dense_factor, grad_with_table, GradOptions, TraceMode};
use super::{GPDataset, PairTable};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::kernel::{compute_phi, BasisSpec, CompactKernel, KernelFile, PhiMatrix};
use crate::linalg;
use crate::sparse::CgOptions;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Optimized in log space, floored at `1e-8·var(y)`.
    Learned,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once the per-point NLL changes by less than this for 5 epochs in a row.
    pub tolerance: f64,
    pub cutoffs: Vec<f64>,
    pub noise: NoiseModel,
    /// Use the Hutchinson estimator with CG solves instead of the dense inverse.
    pub stochastic_trace: bool,
    pub probes: usize,
    pub seed: u64,
    pub cg: CgOptions,
    pub exec: ExecMode,
    pub dense_limit: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            learning_rate: 0.02,
            max_epochs: 500,
            tolerance: 1e-7,
            cutoffs: Vec::new(),
            noise: NoiseModel::Learned,
            stochastic_trace: false,
            probes: 16,
            seed: 0,
            cg: CgOptions::default(),
            exec: ExecMode::default(),
            dense_limit: super::DENSE_LIMIT,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.cutoffs.is_empty() {
            return bad("cutoff grid is empty");
        }
        if let Some(c) = self.cutoffs.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidParameter(format!("cutoff must be > 0, got {c}")));
        }
        if !(self.learning_rate > 0.0) || !(self.tolerance > 0.0) || self.max_epochs == 0 || self.probes == 0 {
            return bad("learning rate, tolerance, max epochs and probes must be positive");
        }
        if let NoiseModel::Fixed(s) = self.noise {
            if !(s > 0.0 && s.is_finite()) {
                return bad("fixed noise must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffSummary {
    pub cutoff: f64,
    pub nll: Option<f64>,
    pub epochs: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub kernel: KernelFile,
    pub cutoff: f64,
    pub noise: f64,
    /// Total negative log likelihood of the training data.
    pub nll: f64,
    pub nll_per_point: f64,
    /// Total NLL at every epoch of the chosen cutoff.
    pub nll_trace: Vec<f64>,
    /// Noise variance at every epoch of the chosen cutoff.
    pub noise_trace: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
    pub candidates: Vec<CutoffSummary>,
    pub n: usize,
    pub trace_estimator: &'static str,
    pub cg_iterations: usize,
    pub wall_time_seconds: f64,
}

impl FitReport {
    pub fn to_kernel(&self) -> Result<CompactKernel> {
        self.kernel.to_kernel()
    }
}

struct CutoffFit {
    a: Vec<f64>,
    noise: f64,
    nll: f64,
    nll_trace: Vec<f64>,
    noise_trace: Vec<f64>,
    epochs: usize,
    converged: bool,
    cg_iterations: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for k in 0..theta.len() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * grad[k];
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * grad[k] * grad[k];
            theta[k] -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + 1e-8);
        }
    }
}

fn lower_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (0..=i).map(move |j| (i, j))).collect()
}

fn a_from_l(l: &[f64], m: usize) -> Vec<f64> {
    let mut a = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            a[i * m + j] = (0..m).map(|k| l[i * m + k] * l[j * m + k]).sum();
        }
    }
    a
}

/// Maximum-likelihood fit of `A = LLᵀ` (and optionally the noise) for each
/// candidate cutoff; the candidate with the lowest final NLL wins.
///
/// Outputs are standardized by `var(y)` internally so the learning rate is
/// scale free; reported values are on the original scale.
pub fn fit_mle(data: &GPDataset, basis: BasisSpec, cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("cannot fit an empty dataset".into()));
    }
    if data.len() > cfg.dense_limit {
        return Err(Error::InvalidParameter(format!(
            "n = {} exceeds the dense limit {}; the likelihood needs a dense log-determinant",
            data.len(),
            cfg.dense_limit
        )));
    }
    let start = Instant::now();
    let phi = Arc::new(compute_phi(basis));
    let var = data.y_variance();
    let scale = if var > 0.0 { var } else { 1.0 };
    let y: Vec<f64> = data.y().iter().map(|v| v / scale.sqrt()).collect();
    let log_scale_total = 0.5 * data.len() as f64 * scale.ln();

    let mut candidates = Vec::new();
    let mut best: Option<(f64, CutoffFit)> = None;
    for &c in &cfg.cutoffs {
        match fit_one(&phi, c, data, &y, scale, log_scale_total, cfg) {
            Ok(fit) if fit.nll.is_finite() => {
                candidates.push(CutoffSummary {
                    cutoff: c,
                    nll: Some(fit.nll),
                    epochs: fit.epochs,
                    converged: fit.converged,
                    error: None,
                });
                if best.as_ref().is_none_or(|(_, b)| fit.nll < b.nll) {
                    best = Some((c, fit));
                }
            }
            Ok(fit) => candidates.push(CutoffSummary {
                cutoff: c,
                nll: None,
                epochs: fit.epochs,
                converged: false,
                error: Some("non-finite likelihood".into()),
            }),
            Err(e) => candidates.push(CutoffSummary {
                cutoff: c,
                nll: None,
                epochs: 0,
                converged: false,
                error: Some(e.to_string()),
            }),
        }
    }
    let (cutoff, fit) = best.ok_or(Error::AllCutoffsFailed)?;
    let kernel = CompactKernel::with_phi(phi, fit.a.clone(), cutoff)?;
    let n = data.len();
    Ok(FitReport {
        kernel: KernelFile::from_kernel(&kernel, fit.noise),
        cutoff,
        noise: fit.noise,
        nll: fit.nll,
        nll_per_point: fit.nll / n as f64,
        nll_trace: fit.nll_trace,
        noise_trace: fit.noise_trace,
        epochs: fit.epochs,
        converged: fit.converged,
        candidates,
        n,
        trace_estimator: if cfg.stochastic_trace { "hutchinson" } else { "exact" },
        cg_iterations: fit.cg_iterations,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

fn fit_one(
    phi: &Arc<PhiMatrix>,
    cutoff: f64,
    data: &GPDataset,
    y: &[f64],
    scale: f64,
    log_scale_total: f64,
    cfg: &FitConfig,
) -> Result<CutoffFit> {
    let m = phi.order();
    let n = data.len() as f64;
    let table = PairTable::new(phi, cutoff, data.x(), cfg.exec)?;
    let pairs = lower_pairs(m);
    let learn_noise = cfg.noise == NoiseModel::Learned;
    let floor = 1e-8_f64;

    let mut theta = vec![0.0; pairs.len() + usize::from(learn_noise)];
    for (p, &(i, j)) in pairs.iter().enumerate() {
        if i == j {
            theta[p] = (1.0 / m as f64).sqrt();
        }
    }
    let fixed_noise = match cfg.noise {
        NoiseModel::Fixed(s) => s / scale,
        NoiseModel::Learned => {
            theta[pairs.len()] = 0.01_f64.ln();
            0.0
        }
    };

    let mut adam = Adam::new(theta.len(), cfg.learning_rate);
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut nll_trace: Vec<f64> = Vec::new();
    let mut noise_trace = Vec::new();
    let mut cg_iterations = 0;
    let mut quiet = 0;
    let mut converged = false;
    let mut epochs = 0;

    for epoch in 0..cfg.max_epochs {
        let mut l = vec![0.0; m * m];
        for (p, &(i, j)) in pairs.iter().enumerate() {
            l[i * m + j] = theta[p];
        }
        let a = a_from_l(&l, m);
        let min_eig = linalg::min_eigenvalue(&a, m)?;
        debug_assert!(min_eig >= -1e-12 * linalg::trace(&a, m).max(f64::MIN_POSITIVE));
        let s2 = if learn_noise { theta[pairs.len()].exp() } else { fixed_noise };

        let opts = GradOptions {
            trace: if cfg.stochastic_trace {
                TraceMode::Hutchinson {
                    probes: cfg.probes,
                    seed: cfg.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                }
            } else {
                TraceMode::Exact
            },
            cg: cfg.cg,
            jacobi: false,
            exec: cfg.exec,
            dense_limit: cfg.dense_limit,
        };
        let step = grad_with_table(&table, &a, s2, y, &opts);
        let grad = match step {
            Ok(g) => g,
            Err(e) if epoch == 0 => return Err(e),
            Err(_) => break,
        };
        cg_iterations += grad.cg_iterations;
        let nll_std = match grad.nll {
            Some(v) => v,
            None => {
                let chol = dense_factor(&table.assemble(&a, s2, cfg.exec), cfg.dense_limit)?;
                nll_from_factor(&chol, y).0
            }
        };
        let nll = nll_std + log_scale_total;
        epochs = epoch + 1;
        if !nll.is_finite() {
            break;
        }
        if let Some(prev) = nll_trace.last() {
            if ((nll - prev) / n).abs() < cfg.tolerance {
                quiet += 1;
            } else {
                quiet = 0;
            }
        }
        nll_trace.push(nll);
        noise_trace.push(s2 * scale);
        if best.as_ref().is_none_or(|(b, _, _)| nll < *b) {
            best = Some((nll, a.clone(), s2));
        }
        if quiet >= 5 {
            converged = true;
            break;
        }

        // dNLL/dL = (G + Gᵀ) L = 2 G L for symmetric G
        let mut g = vec![0.0; theta.len()];
        for (p, &(i, j)) in pairs.iter().enumerate() {
            g[p] = 2.0 * (0..m).map(|k| grad.a[i * m + k] * l[k * m + j]).sum::<f64>();
        }
        if learn_noise {
            g[pairs.len()] = grad.noise * s2;
        }
        adam.step(&mut theta, &g);
        if learn_noise {
            theta[pairs.len()] = theta[pairs.len()].max(floor.ln());
        }
    }

    let (nll, a, s2) = best.ok_or_else(|| Error::InvalidParameter("no epoch produced a finite likelihood".into()))?;
    Ok(CutoffFit {
        a: a.iter().map(|v| v * scale).collect(),
        noise: s2 * scale,
        nll,
        nll_trace,
        noise_trace,
        epochs,
        converged,
        cg_iterations,
    })
}
