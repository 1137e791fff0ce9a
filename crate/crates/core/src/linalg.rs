//! Thin wrappers over `faer` for the dense kernels the crate needs.
//!
//! Small parameter matrices are passed around as row-major `&[f64]` of
//! length `m * m`; large Gram matrices live in `faer::Mat`.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

pub fn to_mat(a: &[f64], m: usize) -> Mat<f64> {
    Mat::from_fn(m, m, |i, j| a[i * m + j])
}

pub fn from_mat(a: &Mat<f64>) -> Vec<f64> {
    let (r, c) = (a.nrows(), a.ncols());
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub fn symmetrize(a: &mut [f64], m: usize) {
    for i in 0..m {
        for j in (i + 1)..m {
            let v = 0.5 * (a[i * m + j] + a[j * m + i]);
            a[i * m + j] = v;
            a[j * m + i] = v;
        }
    }
}

pub fn trace(a: &[f64], m: usize) -> f64 {
    (0..m).map(|i| a[i * m + i]).sum()
}

/// `tr(A B)` for symmetric row-major matrices, i.e. `Σ A_ij B_ij`.
pub fn frobenius_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues (ascending) and eigenvectors (columns of a row-major matrix).
pub fn sym_eigen(a: &[f64], m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mat = to_mat(a, m);
    let evd = mat
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenFailure)?;
    let vals: Vec<f64> = (0..m).map(|k| evd.S().column_vector()[k]).collect();
    let u = evd.U();
    let mut vecs = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            vecs[i * m + k] = u[(i, k)];
        }
    }
    Ok((vals, vecs))
}

pub fn sym_eigenvalues_mat(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::EigenFailure)
}

pub fn min_eigenvalue(a: &[f64], m: usize) -> Result<f64> {
    let vals = sym_eigenvalues_mat(&to_mat(a, m))?;
    Ok(vals.first().copied().unwrap_or(0.0))
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clamped to zero.
pub fn project_psd(s: &[f64], m: usize) -> Result<Vec<f64>> {
    let (vals, vecs) = sym_eigen(s, m)?;
    let mut out = vec![0.0; m * m];
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        for i in 0..m {
            let vi = vecs[i * m + k] * lam;
            if vi == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i * m + j] += vi * vecs[j * m + k];
            }
        }
    }
    symmetrize(&mut out, m);
    Ok(out)
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix.
pub fn psd_pinv(a: &[f64], m: usize) -> Result<Vec<f64>> {
    let (vals, vecs) = sym_eigen(a, m)?;
    let cut = vals.iter().cloned().fold(0.0f64, f64::max) * 1e-12 * m as f64;
    let mut out = vec![0.0; m * m];
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= cut {
            continue;
        }
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] += vecs[i * m + k] * vecs[j * m + k] / lam;
            }
        }
    }
    Ok(out)
}

/// Singular values (descending) of a row-major `rows × cols` matrix.
pub fn singular_values(data: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    let mat = Mat::from_fn(rows, cols, |i, j| data[i * cols + j]);
    mat.singular_values().map_err(|_| Error::EigenFailure)
}

/// Dense Cholesky factorization `K = L Lᵀ`.
pub struct DenseCholesky {
    llt: faer::linalg::solvers::Llt<f64>,
}

impl DenseCholesky {
    pub fn factor(k: MatRef<'_, f64>) -> Result<Self> {
        match k.llt(Side::Lower) {
            Ok(llt) => Ok(Self { llt }),
            Err(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index }) => {
                Err(Error::NotPositiveDefinite { pivot: index })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.llt.L().nrows()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves `K X = B` in place for a column block `B`.
    pub fn solve_in_place(&self, b: &mut Mat<f64>) {
        self.llt.solve_in_place(b.as_mut());
    }

    /// Solves `L X = B` in place for a column block `B`.
    pub fn solve_lower_in_place(&self, b: &mut Mat<f64>) {
        solve_lower_triangular_in_place(self.llt.L(), b.as_mut(), Par::Seq);
    }

    pub fn log_det(&self) -> f64 {
        let l = self.llt.L();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> Mat<f64> {
        self.llt.inverse()
    }

    pub fn lower(&self) -> faer::MatRef<'_, f64> {
        self.llt.L()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_reconstructs() {
        let a = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let (vals, vecs) = sym_eigen(&a, 3).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3)
                    .map(|k| vecs[i * 3 + k] * vals[k] * vecs[j * 3 + k])
                    .sum();
                assert!((r - a[i * 3 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        let k = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                if i == 2 {
                    -1.0
                } else {
                    1.0
                }
            } else {
                0.0
            }
        });
        match DenseCholesky::factor(k.as_ref()) {
            Err(Error::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 2),
            _ => panic!("expected failure"),
        }
        let k = Mat::from_fn(2, 2, |i, j| if i == j { 4.0 } else { 1.0 });
        let c = DenseCholesky::factor(k.as_ref()).unwrap();
        assert!((c.log_det() - 15f64.ln()).abs() < 1e-14);
        let x = c.solve(&[5.0, 5.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
