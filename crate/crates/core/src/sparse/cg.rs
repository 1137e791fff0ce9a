use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Preconditioner {
    None,
    /// Diagonal of the operator; each residual is divided by it.
    Jacobi(Vec<f64>),
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Relative residual target `‖Ax - b‖ / ‖b‖`.
    pub tol: f64,
    /// `None` means `10 n`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgStats {
    pub iterations: usize,
    /// Relative to `‖b‖`.
    pub final_residual_norm: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradient for a symmetric positive definite operator.
///
/// `apply(x, y)` must write `A x` into `y`. Non-convergence is reported through
/// [`CgStats::converged`]; only a non-positive curvature `pᵀAp <= 0` is an error.
/// When the recursive residual drops below tolerance the true residual is
/// recomputed, and iteration restarts from it if it is still too large.
pub fn conjugate_gradient<F>(
    apply: F,
    b: &[f64],
    opts: &CgOptions,
    precond: &Preconditioner,
) -> Result<(Vec<f64>, CgStats)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "CG tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if let Preconditioner::Jacobi(d) = precond {
        if d.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d.len(),
            });
        }
        if d.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter(
                "Jacobi diagonal must be positive".into(),
            ));
        }
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((
            x,
            CgStats {
                iterations: 0,
                final_residual_norm: 0.0,
                converged: true,
            },
        ));
    }
    let target = opts.tol * b_norm;

    let precondition = |r: &[f64], z: &mut [f64]| match precond {
        Preconditioner::None => z.copy_from_slice(r),
        Preconditioner::Jacobi(d) => {
            for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
                *zi = ri / di;
            }
        }
    };

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut r_norm = b_norm;

    while iterations < max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::BreakdownDetected {
                iteration: iterations,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        r_norm = norm(&r);

        if r_norm <= target {
            // the recursion drifts from the true residual in finite precision
            apply(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            r_norm = norm(&r);
            if r_norm <= target {
                return Ok((
                    x,
                    CgStats {
                        iterations,
                        final_residual_norm: r_norm / b_norm,
                        converged: true,
                    },
                ));
            }
            precondition(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }

        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    Ok((
        x,
        CgStats {
            iterations,
            final_residual_norm: r_norm / b_norm,
            converged: false,
        },
    ))
}
