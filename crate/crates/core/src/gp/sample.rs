use faer::MatRef;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dense::gram_buffer;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::kernel::{tensor_product_unchecked, Kernel};
use crate::linalg::DenseCholesky;
use crate::points::Points;

/// Draw `y ~ N(0, K + noise·I)` at `points`.
///
/// The latent draw uses `L z` with `L` the Cholesky factor of the noiseless
/// Gram matrix plus a tiny jitter (grown tenfold until the factorization
/// succeeds); independent noise is added afterwards. Deterministic in `seed`.
pub fn sample_gp<K: Kernel + ?Sized>(kernel: &K, points: &Points, noise: f64, seed: u64) -> Result<Vec<f64>> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise must be >= 0, got {noise}")));
    }
    let n = points.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n > super::DENSE_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "sampling {n} points exceeds the dense limit {}",
            super::DENSE_LIMIT
        )));
    }
    let k0 = tensor_product_unchecked(kernel, &vec![0.0; points.dim()]);
    let base = gram_buffer(kernel, points, 0.0, ExecMode::default());
    let mut jitter = 1e-10 * k0.abs().max(f64::MIN_POSITIVE);
    let chol = loop {
        let mut buf = base.clone();
        for i in 0..n {
            buf[i * n + i] += jitter;
        }
        match DenseCholesky::factor(MatRef::from_column_major_slice(&buf, n, n)) {
            Ok(c) => break c,
            Err(e) if jitter > 1e-4 * k0.abs() => return Err(e),
            Err(_) => jitter *= 10.0,
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let l = chol.lower();
    let sd = noise.sqrt();
    let mut y = vec![0.0; n];
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
    }
    for yi in &mut y {
        let e: f64 = StandardNormal.sample(&mut rng);
        *yi += sd * e;
    }
    Ok(y)
}
