//! Compactly supported kernel families built from basis-function
//! autocorrelations, plus the classical kernels they are compared against.

mod compact;
mod io;
mod phi;
mod target;

pub use compact::CompactKernel;
pub use io::KernelFile;
pub use phi::{compute_phi, phi_numeric_oracle, rank_dimension, ClosedFormEntry, PhiMatrix};
pub use target::{TargetFamily, TargetKernel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest basis order accepted by [`make_basis`].
pub const MAX_ORDER: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisFamily {
    /// Monomials `t^k`, `k = 0..M-1`.
    Polynomial,
    /// Complex exponentials `exp(iπkt)/√2`, `k = 0..M-1`.
    Fourier,
}

impl std::str::FromStr for BasisFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "polynomial" | "poly" => Ok(BasisFamily::Polynomial),
            "fourier" => Ok(BasisFamily::Fourier),
            other => Err(Error::InvalidParameter(format!(
                "unknown basis family '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasisFamily::Polynomial => "polynomial",
            BasisFamily::Fourier => "fourier",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    family: BasisFamily,
    order: usize,
}

impl BasisSpec {
    pub fn family(&self) -> BasisFamily {
        self.family
    }

    /// Number of basis functions `M`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of distinct entries of the symmetric `M × M` correlation matrix.
    pub fn num_entries(&self) -> usize {
        self.order * (self.order + 1) / 2
    }
}

pub fn make_basis(family: BasisFamily, order: usize) -> Result<BasisSpec> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::OrderOutOfRange {
            order,
            max: MAX_ORDER,
        });
    }
    Ok(BasisSpec { family, order })
}

/// Normalized sinc, `sin(πx)/(πx)`, with a series branch near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let px2 = (std::f64::consts::PI * x).powi(2);
        1.0 - px2 / 6.0 + px2 * px2 / 120.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// A translation-invariant, even, one-dimensional kernel `K(t)`.
pub trait Kernel: Send + Sync {
    fn eval(&self, t: f64) -> f64;

    /// Half-width of the support, if compact. `eval` is exactly zero for
    /// `|t| >= support`.
    fn support(&self) -> Option<f64> {
        None
    }

    fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }
}

impl<K: Kernel + ?Sized> Kernel for &K {
    fn eval(&self, t: f64) -> f64 {
        (**self).eval(t)
    }

    fn support(&self) -> Option<f64> {
        (**self).support()
    }

    fn at_zero(&self) -> f64 {
        (**self).at_zero()
    }
}

/// Tensor-product extension `Π_j K(x_j)` of a 1-D kernel to a d-vector offset.
pub fn tensor_product_eval<K: Kernel + ?Sized>(k: &K, x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    Ok(tensor_product_unchecked(k, x))
}

pub(crate) fn tensor_product_unchecked<K: Kernel + ?Sized>(k: &K, x: &[f64]) -> f64 {
    if let Some(c) = k.support() {
        if x.iter().any(|v| v.abs() >= c) {
            return 0.0;
        }
    }
    x.iter().map(|&v| k.eval(v)).product()
}
