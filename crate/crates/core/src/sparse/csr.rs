use std::sync::Arc;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SparsityPattern;
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::kernel::{tensor_product_unchecked, Kernel};
use crate::points::{offset_into, Points};

/// Symmetric kernel matrix `K + σ_n² I` in CSR form, both halves stored.
#[derive(Debug, Clone)]
pub struct SparseKernelMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
    noise: f64,
}

const EXHAUSTIVE_CHECK_LIMIT: usize = 2048;
const RANDOM_CHECK_PAIRS: usize = 1000;

pub fn assemble<K: Kernel + ?Sized>(
    kernel: &K,
    points: &Points,
    pattern: Arc<SparsityPattern>,
    noise: f64,
) -> Result<SparseKernelMatrix> {
    assemble_with(kernel, points, pattern, noise, ExecMode::default())
}

/// Evaluates `K(x_i - x_j)` on every stored entry and adds `noise` on the diagonal.
///
/// Fails with [`Error::PatternTooSmall`] if a pair inside the kernel support is
/// missing from the pattern (exhaustive for `n <= 2048`, 1000 sampled pairs
/// otherwise).
pub fn assemble_with<K: Kernel + ?Sized>(
    kernel: &K,
    points: &Points,
    pattern: Arc<SparsityPattern>,
    noise: f64,
    mode: ExecMode,
) -> Result<SparseKernelMatrix> {
    let n = points.len();
    if pattern.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pattern.n(),
        });
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise must be non-negative, got {noise}"
        )));
    }
    check_coverage(kernel, points, &pattern)?;

    let dim = points.dim();
    let rows: Vec<Vec<f64>> = exec::map_range(mode, n, |i| {
        let mut off = vec![0.0; dim];
        pattern
            .row(i)
            .iter()
            .map(|&j| {
                offset_into(points.point(i), points.point(j), &mut off);
                let v = tensor_product_unchecked(kernel, &off);
                if i == j {
                    v + noise
                } else {
                    v
                }
            })
            .collect()
    });
    let values = rows.concat();
    Ok(SparseKernelMatrix {
        pattern,
        values,
        noise,
    })
}

fn check_coverage<K: Kernel + ?Sized>(
    kernel: &K,
    points: &Points,
    pattern: &SparsityPattern,
) -> Result<()> {
    let n = points.len();
    let inside = |i: usize, j: usize| match kernel.support() {
        Some(c) => points.sup_distance(i, points, j) < c,
        None => true,
    };
    if n <= EXHAUSTIVE_CHECK_LIMIT {
        for i in 0..n {
            for j in 0..n {
                if inside(i, j) && !pattern.contains(i, j) {
                    return Err(Error::PatternTooSmall { row: i, col: j });
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..RANDOM_CHECK_PAIRS {
            let i = rng.random_range(0..n);
            // half the samples are near-diagonal, where in-support pairs live
            let j = if rng.random_bool(0.5) {
                let w = 16.min(n - 1);
                (i + rng.random_range(0..=w)).min(n - 1)
            } else {
                rng.random_range(0..n)
            };
            if inside(i, j) && !pattern.contains(i, j) {
                return Err(Error::PatternTooSmall { row: i, col: j });
            }
        }
    }
    Ok(())
}

impl SparseKernelMatrix {
    /// Wraps precomputed values; the caller guarantees `values` follows `pattern`
    /// and already includes `noise` on the diagonal.
    pub(crate) fn from_parts(pattern: Arc<SparsityPattern>, values: Vec<f64>, noise: f64) -> Self {
        debug_assert_eq!(values.len(), pattern.nnz());
        SparseKernelMatrix { pattern, values, noise }
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.index_of(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    pub fn spmv(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n()];
        self.spmv_into(v, &mut out, ExecMode::default())?;
        Ok(out)
    }

    /// Row-wise CSR product: one multiply-add per stored entry.
    pub fn spmv_into(&self, v: &[f64], out: &mut [f64], mode: ExecMode) -> Result<()> {
        let n = self.n();
        if v.len() != n || out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if v.len() != n { v.len() } else { out.len() },
            });
        }
        let offsets = self.pattern.row_offsets();
        let cols = self.pattern.col_indices();
        let values = &self.values;
        exec::for_each_indexed(mode, out, |i, o| {
            let (start, end) = (offsets[i], offsets[i + 1]);
            let mut acc = 0.0;
            for k in start..end {
                acc += values[k] * v[cols[k]];
            }
            *o = acc;
        });
        Ok(())
    }

    /// Matrix-free operator view for iterative solvers.
    pub fn operator(&self, mode: ExecMode) -> impl Fn(&[f64], &mut [f64]) + Sync + '_ {
        move |x, y| {
            self.spmv_into(x, y, mode)
                .expect("operator called with matching dimensions");
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.n();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for (k, &j) in self.pattern.row(i).iter().enumerate() {
                m[(i, j)] = self.values[self.pattern.row_offsets()[i] + k];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_basis, BasisFamily, CompactKernel, TargetFamily, TargetKernel};
    use crate::sparse::{dense_pattern, sparsity_pattern_sorted};

    fn kernel() -> CompactKernel {
        let b = make_basis(BasisFamily::Fourier, 2).unwrap();
        CompactKernel::new(b, vec![1.0, 0.3, 0.3, 0.5], 1.5).unwrap()
    }

    #[test]
    fn single_point() {
        let k = kernel();
        let pts = Points::from_1d(vec![2.0]).unwrap();
        let m = assemble(&k, &pts, Arc::new(dense_pattern(1)), 0.1).unwrap();
        assert!((m.get(0, 0) - (k.at_zero() + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn far_points_give_diagonal_matrix() {
        let k = kernel();
        let xs = vec![0.0, 2.0, 4.0, 6.0];
        let pts = Points::from_1d(xs.clone()).unwrap();
        let p = sparsity_pattern_sorted(&xs, k.cutoff()).unwrap();
        let m = assemble(&k, &pts, Arc::new(p), 0.0).unwrap();
        assert_eq!(m.nnz(), 4);
        // a dense pattern gives exact zeros off the diagonal too
        let dense = assemble(&k, &pts, Arc::new(dense_pattern(4)), 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(dense.get(i, j), m.get(i, j));
            }
        }
    }

    #[test]
    fn sparse_matches_dense_assembly_and_spmv() {
        let k = kernel();
        let xs: Vec<f64> = (0..60)
            .map(|i| i as f64 * 0.37 + (i as f64 * 1.3).sin() * 0.1)
            .collect();
        let pts = Points::from_1d(xs.clone()).unwrap();
        let sparse = assemble(
            &k,
            &pts,
            Arc::new(sparsity_pattern_sorted(&xs, k.cutoff()).unwrap()),
            0.2,
        )
        .unwrap();
        let dense = assemble(&k, &pts, Arc::new(dense_pattern(60)), 0.2)
            .unwrap()
            .to_dense();
        let s = sparse.to_dense();
        for i in 0..60 {
            for j in 0..60 {
                assert_eq!(s[(i, j)], dense[(i, j)]);
                assert_eq!(s[(i, j)], s[(j, i)]);
            }
        }
        let v: Vec<f64> = (0..60).map(|i| (i as f64).cos()).collect();
        let got = sparse.spmv(&v).unwrap();
        let mut seq = vec![0.0; 60];
        sparse
            .spmv_into(&v, &mut seq, ExecMode::Sequential)
            .unwrap();
        assert_eq!(got, seq);
        for i in 0..60 {
            let want: f64 = (0..60).map(|j| dense[(i, j)] * v[j]).sum();
            assert!((got[i] - want).abs() <= 1e-13 * want.abs().max(1.0));
        }
        assert_eq!(sparse.spmv(&vec![0.0; 60]).unwrap(), vec![0.0; 60]);
        assert!(sparse.spmv(&[1.0]).is_err());
    }

    #[test]
    fn spmv_does_one_multiply_add_per_entry() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.5).collect();
        let pts = Points::from_1d(xs.clone()).unwrap();
        let ones = TargetKernel::new(TargetFamily::Wendland1, 1.0, 1.6).unwrap();
        let pattern = Arc::new(sparsity_pattern_sorted(&xs, 1.6).unwrap());
        let m = assemble(&ones, &pts, pattern.clone(), 0.0).unwrap();
        // replace values by 1 so the product counts contributions per row
        let counting = SparseKernelMatrix {
            pattern: pattern.clone(),
            values: vec![1.0; m.nnz()],
            noise: 0.0,
        };
        let total: f64 = counting.spmv(&vec![1.0; 40]).unwrap().iter().sum();
        assert_eq!(total as usize, m.nnz());
    }

    #[test]
    fn identity_matrix_leaves_vector_unchanged() {
        let xs = vec![0.0, 5.0, 10.0];
        let pts = Points::from_1d(xs.clone()).unwrap();
        let w = TargetKernel::new(TargetFamily::Wendland1, 1.0, 1.0).unwrap();
        let m = assemble(
            &w,
            &pts,
            Arc::new(sparsity_pattern_sorted(&xs, 1.0).unwrap()),
            0.0,
        )
        .unwrap();
        assert_eq!(m.spmv(&[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn missing_pairs_are_detected() {
        let k = kernel();
        let xs = vec![0.0, 1.0, 2.0];
        let pts = Points::from_1d(xs.clone()).unwrap();
        let narrow = sparsity_pattern_sorted(&xs, 0.5).unwrap();
        assert!(matches!(
            assemble(&k, &pts, Arc::new(narrow), 0.0),
            Err(Error::PatternTooSmall { row: 0, col: 1 })
        ));
        let se = TargetKernel::new(TargetFamily::SquaredExponential, 1.0, 1.0).unwrap();
        let p = sparsity_pattern_sorted(&xs, 1.5).unwrap();
        assert!(assemble(&se, &pts, Arc::new(p), 0.0).is_err());
    }
}
