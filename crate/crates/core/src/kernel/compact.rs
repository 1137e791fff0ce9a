use std::sync::Arc;

use super::{compute_phi, BasisSpec, Kernel, PhiMatrix};
use crate::error::{Error, Result};
use crate::linalg;

/// `K(t) = tr(A Φ(|t|/c))` for a PSD parameter matrix `A` and cutoff `c`.
#[derive(Debug, Clone)]
pub struct CompactKernel {
    phi: Arc<PhiMatrix>,
    a: Vec<f64>,
    cutoff: f64,
}

impl CompactKernel {
    pub fn new(basis: BasisSpec, a: Vec<f64>, cutoff: f64) -> Result<Self> {
        Self::with_phi(Arc::new(compute_phi(basis)), a, cutoff)
    }

    /// Builds a kernel sharing an already computed `Φ`. `a` is row-major and
    /// is symmetrized; it must be PSD up to `1e-10·max(1, tr A)`.
    pub fn with_phi(phi: Arc<PhiMatrix>, mut a: Vec<f64>, cutoff: f64) -> Result<Self> {
        let m = phi.order();
        if a.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: a.len(),
            });
        }
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cutoff must be positive, got {cutoff}"
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "parameter matrix has non-finite entries".into(),
            ));
        }
        linalg::symmetrize(&mut a, m);
        let min_eig = linalg::min_eigenvalue(&a, m)?;
        if min_eig < -1e-10 * linalg::trace(&a, m).max(1.0) {
            return Err(Error::NotPsd {
                min_eigenvalue: min_eig,
            });
        }
        Ok(Self { phi, a, cutoff })
    }

    pub fn basis(&self) -> BasisSpec {
        self.phi.basis()
    }

    pub fn order(&self) -> usize {
        self.phi.order()
    }

    pub fn phi(&self) -> &Arc<PhiMatrix> {
        &self.phi
    }

    /// Row-major parameter matrix.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Same `A` and basis, different support.
    pub fn with_cutoff(&self, cutoff: f64) -> Result<Self> {
        Self::with_phi(self.phi.clone(), self.a.clone(), cutoff)
    }

    /// `∇_A K(t) = Φ(|t|/c)`, row-major; zero outside the support.
    pub fn grad_a(&self, t: f64) -> Vec<f64> {
        self.phi.eval(t.abs() / self.cutoff)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_phi(
            self.phi.clone(),
            self.a.iter().map(|v| v * factor).collect(),
            self.cutoff,
        )
    }
}

impl Kernel for CompactKernel {
    fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        if t >= self.cutoff {
            return 0.0;
        }
        let tau = t / self.cutoff;
        let m = self.order();
        let mut acc = 0.0;
        for i in 0..m {
            acc += self.a[i * m + i] * self.phi.entry(i, i).eval(tau);
            for j in (i + 1)..m {
                let aij = self.a[i * m + j];
                if aij != 0.0 {
                    acc += 2.0 * aij * self.phi.entry(i, j).eval(tau);
                }
            }
        }
        acc
    }

    fn support(&self) -> Option<f64> {
        Some(self.cutoff)
    }
}
