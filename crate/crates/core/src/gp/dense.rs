use faer::{Mat, MatRef};

use super::GPDataset;
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::kernel::{tensor_product_unchecked, Kernel};
use crate::linalg::DenseCholesky;
use crate::points::{offset_into, Points};

/// Column-major `n × n` buffer of `K(x_i - x_j) + noise·δ_ij`.
pub(crate) fn gram_buffer<K: Kernel + ?Sized>(kernel: &K, x: &Points, noise: f64, mode: ExecMode) -> Vec<f64> {
    let n = x.len();
    let dim = x.dim();
    let mut buf = vec![0.0; n * n];
    if n == 0 {
        return buf;
    }
    exec::for_each_chunk(mode, &mut buf, n, |j, col| {
        let mut off = vec![0.0; dim];
        for (i, v) in col.iter_mut().enumerate() {
            offset_into(x.point(i), x.point(j), &mut off);
            *v = tensor_product_unchecked(kernel, &off);
        }
        col[j] += noise;
    });
    buf
}

pub fn gram_dense<K: Kernel + ?Sized>(kernel: &K, x: &Points, noise: f64) -> Mat<f64> {
    let n = x.len();
    let buf = gram_buffer(kernel, x, noise, ExecMode::default());
    MatRef::from_column_major_slice(&buf, n, n).to_owned()
}

/// `½ yᵀK⁻¹y + ½ log|2πK|` from a factorization of `K`.
pub(crate) fn nll_from_factor(chol: &DenseCholesky, y: &[f64]) -> (f64, Vec<f64>) {
    let alpha = chol.solve(y);
    let quad: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let n = y.len() as f64;
    let nll = 0.5 * quad + 0.5 * (chol.log_det() + n * (2.0 * std::f64::consts::PI).ln());
    (nll, alpha)
}

pub fn nll_dense<K: Kernel + ?Sized>(kernel: &K, data: &GPDataset, noise: f64) -> Result<f64> {
    nll_dense_with(kernel, data, noise, super::DENSE_LIMIT)
}

/// Negative log marginal likelihood via dense Cholesky.
pub fn nll_dense_with<K: Kernel + ?Sized>(kernel: &K, data: &GPDataset, noise: f64, dense_limit: usize) -> Result<f64> {
    let n = data.len();
    if n > dense_limit {
        return Err(Error::InvalidParameter(format!("n = {n} exceeds the dense limit {dense_limit}")));
    }
    check_noise(noise)?;
    let buf = gram_buffer(kernel, data.x(), noise, ExecMode::default());
    let chol = DenseCholesky::factor(MatRef::from_column_major_slice(&buf, n, n))?;
    Ok(nll_from_factor(&chol, data.y()).0)
}

pub(crate) fn check_noise(noise: f64) -> Result<()> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise must be non-negative and finite, got {noise}")));
    }
    Ok(())
}
