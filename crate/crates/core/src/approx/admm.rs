use faer::Mat;
use serde::Serialize;

use super::ApproxProblem;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, project_psd, psd_pinv, DenseCholesky};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxOptions {
    /// Relative tolerance on both primal and dual residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial penalty.
    pub rho: f64,
    /// Iterations between penalty rebalancing and between objective snapshots.
    pub rebalance_every: usize,
    /// Enforce `tr(AΦ(0)) = K(0)`.
    pub peak_matching: bool,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            tol: 1e-8,
            max_iter: 100_000,
            rho: 1.0,
            rebalance_every: 50,
            peak_matching: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxResult {
    pub order: usize,
    /// Row-major `M × M`, symmetric PSD.
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub l2_error: f64,
    /// `l2_error²`, the integrated squared residual.
    pub squared_l2_error: f64,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// Best feasible objective seen so far, recorded every `rebalance_every` iterations.
    pub objective_trace: Vec<f64>,
}

impl ApproxResult {
    /// Diagnostics written next to the kernel JSON.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "l2_error": self.l2_error,
            "squared_l2_error": self.squared_l2_error,
            "iterations": self.iterations,
            "residuals": [self.primal_residual, self.dual_residual],
            "objective": self.objective,
            "converged": self.converged,
            "objective_trace": self.objective_trace,
        })
    }
}

/// Symmetric-matrix coordinates in which the Frobenius inner product is the
/// Euclidean one: diagonal entries as is, off-diagonals scaled by √2.
struct Svec {
    m: usize,
    pairs: Vec<(usize, usize)>,
}

impl Svec {
    fn new(m: usize) -> Self {
        Svec {
            m,
            pairs: (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect(),
        }
    }

    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn scale(i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            std::f64::consts::SQRT_2
        }
    }

    fn pack(&self, a: &[f64]) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|&(i, j)| Self::scale(i, j) * a[i * self.m + j])
            .collect()
    }

    fn to_mat(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (&(i, j), v) in self.pairs.iter().zip(x) {
            let e = v / Self::scale(i, j);
            a[i * m + j] = e;
            a[j * m + i] = e;
        }
        a
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(h: &[f64], x: &[f64]) -> Vec<f64> {
    let p = x.len();
    h.chunks(p).map(|row| dot(row, x)).collect()
}

/// `(Q + ρI)⁻¹` as a dense row-major matrix.
fn shifted_inverse(q: &[f64], p: usize, rho: f64) -> Result<Vec<f64>> {
    let h = Mat::from_fn(p, p, |i, j| q[i * p + j] + if i == j { rho } else { 0.0 });
    let inv = DenseCholesky::factor(h.as_ref())?.inverse();
    Ok((0..p * p).map(|k| inv[(k / p, k % p)]).collect())
}

/// Minimizes the quadratic objective over PSD `A`, optionally with the
/// peak-matching equality, by ADMM.
///
/// The quadratic block is solved exactly through its KKT system; the cone block
/// is a PSD projection. The returned `A` is the best exactly-feasible point
/// found, obtained by rescaling the projected iterate onto the equality.
pub fn solve_compact_approx(problem: &ApproxProblem, opts: &ApproxOptions) -> Result<ApproxResult> {
    if !(opts.tol > 0.0) || !(opts.rho > 0.0) || opts.rebalance_every == 0 {
        return Err(Error::InvalidParameter(
            "ADMM needs positive tol, rho and rebalance interval".into(),
        ));
    }
    let m = problem.order();
    let m2 = m * m;
    let sv = Svec::new(m);
    let p = sv.len();
    let k0 = problem.k0();
    let phi0 = problem.phi0();

    let qmat: Vec<f64> = {
        let mut q = vec![0.0; p * p];
        for (a, &(i, j)) in sv.pairs.iter().enumerate() {
            for (b, &(k, l)) in sv.pairs.iter().enumerate() {
                q[a * p + b] = Svec::scale(i, j)
                    * Svec::scale(k, l)
                    * problem.r()[(i * m + j) * m2 + k * m + l];
            }
        }
        q
    };
    let qvec = sv.pack(problem.b());
    let avec = sv.pack(phi0);

    let finish = |a: Vec<f64>, iterations, primal, dual, converged, trace: Vec<f64>| {
        let l2_error = problem.l2_error(&a);
        ApproxResult {
            order: m,
            l2_error,
            squared_l2_error: l2_error * l2_error,
            objective: problem.objective(&a),
            a,
            iterations,
            primal_residual: primal,
            dual_residual: dual,
            converged,
            objective_trace: trace,
        }
    };

    let mut z = vec![0.0; p];
    if opts.peak_matching {
        let phi0_scale = phi0.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if k0 < 0.0 {
            return Err(Error::InfeasibleConstraint(format!(
                "K(0) = {k0} is negative"
            )));
        }
        if phi0_scale == 0.0 {
            if k0 != 0.0 {
                return Err(Error::InfeasibleConstraint(
                    "Φ(0) vanishes but K(0) is nonzero".into(),
                ));
            }
        } else if k0 == 0.0 && min_eigenvalue(phi0, m)? > 1e-12 * phi0_scale {
            // tr(AΦ(0)) = 0 with Φ(0) positive definite forces A = 0
            let obj = problem.objective(&vec![0.0; m2]);
            return Ok(finish(vec![0.0; m2], 0, 0.0, 0.0, true, vec![obj]));
        }
        // feasible start: K(0) Φ(0)⁺ / rank
        let pinv = psd_pinv(phi0, m)?;
        let rank = crate::linalg::frobenius_dot(&pinv, phi0);
        if rank > 0.0 {
            z = sv.pack(&pinv.iter().map(|v| v * k0 / rank).collect::<Vec<_>>());
        }
    }

    // best exactly-feasible point, starting from z
    let feasible = |zv: &[f64]| -> Option<Vec<f64>> {
        let a = sv.to_mat(zv);
        if !opts.peak_matching {
            return Some(a);
        }
        let t = crate::linalg::frobenius_dot(&a, phi0);
        if t > 0.0 {
            Some(a.iter().map(|v| v * k0 / t).collect())
        } else if k0 == 0.0 {
            Some(a)
        } else {
            None
        }
    };
    let mut best_a = feasible(&z).unwrap_or_else(|| vec![0.0; m2]);
    let mut best_obj = problem.objective(&best_a);
    let mut trace = vec![best_obj];

    let mut rho = opts.rho;
    let mut hinv = shifted_inverse(&qmat, p, rho)?;
    let mut ha = matvec(&hinv, &avec);
    let mut aha = dot(&avec, &ha);
    let mut u = vec![0.0; p];
    let mut x = vec![0.0; p];
    let q_norm = norm(&qvec);
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);

    for it in 1..=opts.max_iter {
        let rhs: Vec<f64> = (0..p).map(|k| qvec[k] + rho * (z[k] - u[k])).collect();
        let y = matvec(&hinv, &rhs);
        x = if opts.peak_matching && aha > 0.0 {
            let lambda = (dot(&avec, &y) - k0) / aha;
            y.iter().zip(&ha).map(|(yk, hk)| yk - lambda * hk).collect()
        } else {
            y
        };

        let v: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + b).collect();
        let z_new = sv.pack(&project_psd(&sv.to_mat(&v), m)?);
        let mut dz = 0.0;
        let mut r = 0.0;
        for k in 0..p {
            dz += (z_new[k] - z[k]).powi(2);
            r += (x[k] - z_new[k]).powi(2);
            u[k] += x[k] - z_new[k];
        }
        z = z_new;
        primal = r.sqrt();
        dual = rho * dz.sqrt();

        let eps_pri = opts.tol * norm(&x).max(norm(&z)).max(f64::MIN_POSITIVE);
        let qx_norm = norm(&matvec(&qmat, &x));
        let eps_dual = opts.tol
            * (rho * norm(&u))
                .max(qx_norm)
                .max(q_norm)
                .max(f64::MIN_POSITIVE);
        let converged = primal <= eps_pri && dual <= eps_dual;

        if converged || it % 10 == 0 {
            if let Some(cand) = feasible(&z) {
                let obj = problem.objective(&cand);
                if obj < best_obj {
                    best_obj = obj;
                    best_a = cand;
                }
            }
        }
        if converged {
            trace.push(best_obj);
            return Ok(finish(best_a, it, primal, dual, true, trace));
        }

        if it % opts.rebalance_every == 0 {
            trace.push(best_obj);
            let (rp, rd) = (primal / eps_pri, dual / eps_dual);
            let new_rho = if rp > 10.0 * rd {
                rho * 2.0
            } else if rd > 10.0 * rp {
                rho / 2.0
            } else {
                rho
            };
            let new_rho = new_rho.clamp(1e-8, 1e8);
            if new_rho != rho {
                for uk in u.iter_mut() {
                    *uk *= rho / new_rho;
                }
                rho = new_rho;
                hinv = shifted_inverse(&qmat, p, rho)?;
                ha = matvec(&hinv, &avec);
                aha = dot(&avec, &ha);
            }
        }
    }
    let _ = x;
    trace.push(best_obj);
    Err(Error::MaxIterationsExceeded(Box::new(finish(
        best_a,
        opts.max_iter,
        primal,
        dual,
        false,
        trace,
    ))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::QuadratureSpec;
    use crate::kernel::{
        compute_phi, make_basis, BasisFamily, Kernel, PhiMatrix, TargetFamily, TargetKernel,
    };
    use crate::linalg::{min_eigenvalue, trace};
    use std::sync::Arc;

    fn problem(family: BasisFamily, m: usize, target: TargetFamily, c: f64) -> ApproxProblem {
        let phi = Arc::new(compute_phi(make_basis(family, m).unwrap()));
        let t = TargetKernel::new(target, 1.0, 1.0).unwrap();
        ApproxProblem::new(phi, &t, c, &QuadratureSpec::default()).unwrap()
    }

    #[test]
    fn order_one_is_pinned_by_constraint() {
        for tf in TargetFamily::ALL {
            let res = solve_compact_approx(
                &problem(BasisFamily::Fourier, 1, tf, 2.0),
                &ApproxOptions::default(),
            )
            .unwrap();
            assert!((res.a[0] - 1.0).abs() < 1e-8, "{tf:?}: {}", res.a[0]);
        }
    }

    #[test]
    fn output_is_feasible_and_trace_monotone() {
        for family in [BasisFamily::Fourier, BasisFamily::Polynomial] {
            for tf in [
                TargetFamily::SquaredExponential,
                TargetFamily::OrnsteinUhlenbeck,
                TargetFamily::Matern52,
                TargetFamily::Sinc,
            ] {
                let prob = problem(family, 4, tf, 3.0);
                let res = solve_compact_approx(&prob, &ApproxOptions::default()).unwrap();
                let m = 4;
                let peak = crate::linalg::frobenius_dot(&res.a, prob.phi0());
                assert!(
                    (peak - prob.k0()).abs() <= 1e-8 * prob.k0().abs().max(1.0),
                    "{family:?} {tf:?}"
                );
                assert!(min_eigenvalue(&res.a, m).unwrap() >= -1e-9 * trace(&res.a, m).abs());
                for w in res.objective_trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12);
                }
                assert!(res.l2_error >= 0.0);
            }
        }
    }

    #[test]
    fn beats_feasible_baseline() {
        let prob = problem(BasisFamily::Fourier, 5, TargetFamily::Matern52, 4.0);
        let res = solve_compact_approx(&prob, &ApproxOptions::default()).unwrap();
        let mut baseline = vec![0.0; 25];
        for i in 0..5 {
            baseline[i * 6] = prob.k0() / 5.0;
        }
        assert!(res.l2_error <= prob.l2_error(&baseline));
    }

    #[test]
    fn recovers_compact_target() {
        let phi = Arc::new(compute_phi(make_basis(BasisFamily::Fourier, 3).unwrap()));
        let a = vec![1.0, 0.4, 0.1, 0.4, 0.8, 0.2, 0.1, 0.2, 0.5];
        let k = crate::kernel::CompactKernel::with_phi(phi.clone(), a, 2.0).unwrap();
        let prob = ApproxProblem::new(phi, &k, 2.0, &QuadratureSpec::default()).unwrap();
        let res = solve_compact_approx(&prob, &ApproxOptions::default()).unwrap();
        assert!(res.l2_error < 1e-6, "{}", res.l2_error);
    }

    #[test]
    fn zero_peak_returns_zero_matrix() {
        struct Zero;
        impl Kernel for Zero {
            fn eval(&self, _: f64) -> f64 {
                0.0
            }
        }
        let phi = Arc::new(compute_phi(make_basis(BasisFamily::Fourier, 3).unwrap()));
        let prob = ApproxProblem::new(phi, &Zero, 1.0, &QuadratureSpec::default()).unwrap();
        let res = solve_compact_approx(&prob, &ApproxOptions::default()).unwrap();
        assert_eq!(res.a, vec![0.0; 9]);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn negative_peak_is_infeasible() {
        struct Neg;
        impl Kernel for Neg {
            fn eval(&self, t: f64) -> f64 {
                -(-t * t).exp()
            }
        }
        let phi: Arc<PhiMatrix> =
            Arc::new(compute_phi(make_basis(BasisFamily::Fourier, 2).unwrap()));
        let prob = ApproxProblem::new(phi, &Neg, 1.0, &QuadratureSpec::default()).unwrap();
        assert!(matches!(
            solve_compact_approx(&prob, &ApproxOptions::default()),
            Err(Error::InfeasibleConstraint(_))
        ));
        let free = ApproxOptions {
            peak_matching: false,
            ..Default::default()
        };
        let res = solve_compact_approx(&prob, &free).unwrap();
        assert!(res.a.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let prob = problem(
            BasisFamily::Polynomial,
            4,
            TargetFamily::SquaredExponential,
            3.0,
        );
        let opts = ApproxOptions {
            max_iter: 5,
            ..Default::default()
        };
        match solve_compact_approx(&prob, &opts) {
            Err(Error::MaxIterationsExceeded(best)) => {
                assert_eq!(best.iterations, 5);
                assert!(!best.converged);
                assert!(best.l2_error.is_finite());
            }
            other => panic!("expected iteration cap, got {other:?}"),
        }
    }

    #[test]
    fn unconstrained_fit_is_no_worse() {
        let prob = problem(
            BasisFamily::Fourier,
            4,
            TargetFamily::OrnsteinUhlenbeck,
            4.0,
        );
        let on = solve_compact_approx(&prob, &ApproxOptions::default()).unwrap();
        let off = solve_compact_approx(
            &prob,
            &ApproxOptions {
                peak_matching: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(off.l2_error <= on.l2_error * (1.0 + 1e-6));
    }
}
