use serde::{Deserialize, Serialize};

use super::{make_basis, BasisFamily, CompactKernel};
use crate::error::Result;

/// On-disk kernel description.
///
/// `A` is stored fully, row-major, and symmetrized on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    pub basis: BasisFamily,
    pub order: usize,
    pub cutoff: f64,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub noise: f64,
}

impl KernelFile {
    pub fn from_kernel(kernel: &CompactKernel, noise: f64) -> Self {
        Self {
            basis: kernel.basis().family(),
            order: kernel.order(),
            cutoff: kernel.cutoff(),
            a: kernel.a().to_vec(),
            noise,
        }
    }

    pub fn to_kernel(&self) -> Result<CompactKernel> {
        let basis = make_basis(self.basis, self.order)?;
        CompactKernel::new(basis, self.a.clone(), self.cutoff)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
