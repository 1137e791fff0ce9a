//! The matrix of symmetrized basis correlations `Φ(τ)`.
//!
//! For basis functions `φ_i` on [-1, 1],
//!
//! ```text
//! Φ_ij(τ) = ½ ∫_{-1}^{1-2min(τ,1)} φ_i*(x) φ_j(x+2τ) + φ_j(x) φ_i*(x+2τ) dx
//! ```
//!
//! Any PSD `A` gives a kernel `tr(A Φ(|t|))` supported on [-1, 1]. The Fourier
//! basis has a trigonometric closed form; the polynomial basis is integrated
//! exactly over the rationals.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::{sinc, BasisFamily, BasisSpec};
use crate::error::{Error, Result};
use crate::linalg;
use crate::poly::{binomial, horner, int, ratio, RationalPoly};

#[derive(Debug, Clone, PartialEq)]
pub enum ClosedFormEntry {
    /// Ascending coefficients of a polynomial in `τ = |t|`, valid on [0, 1].
    PolynomialInAbsT { coeffs: Vec<f64> },
    /// `cos(sπτ)(1-τ) sinc(d(1-τ))` with `s = m+n`, `d = n-m` (zero-based).
    Fourier { s: usize, d: i64 },
}

impl ClosedFormEntry {
    /// Value at `tau`; zero outside [0, 1).
    pub fn eval(&self, tau: f64) -> f64 {
        let tau = tau.abs();
        if tau >= 1.0 {
            return 0.0;
        }
        match self {
            ClosedFormEntry::PolynomialInAbsT { coeffs } => horner(coeffs, tau),
            ClosedFormEntry::Fourier { s, d } => {
                let u = 1.0 - tau;
                let c = (*s as f64 * PI * tau).cos();
                let x = *d as f64 * u;
                if *d == 0 || x.abs() < 1e-4 {
                    c * u * sinc(x)
                } else {
                    // sin(πd(1-τ)) = (-1)^(d+1) sin(πdτ), exact zero at τ = 0
                    let sign = if d.rem_euclid(2) == 0 { -1.0 } else { 1.0 };
                    c * sign * (*d as f64 * PI * tau).sin() / (*d as f64 * PI)
                }
            }
        }
    }

    /// Polynomial degree, if this is a polynomial entry (`None` for the zero polynomial).
    pub fn degree(&self) -> Option<usize> {
        match self {
            ClosedFormEntry::PolynomialInAbsT { coeffs } => coeffs.len().checked_sub(1),
            ClosedFormEntry::Fourier { .. } => None,
        }
    }
}

/// Symmetric `M × M` table of closed-form correlation functions.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMatrix {
    basis: BasisSpec,
    entries: Vec<ClosedFormEntry>,
}

impl PhiMatrix {
    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn entry(&self, i: usize, j: usize) -> &ClosedFormEntry {
        &self.entries[i * self.order() + j]
    }

    /// Row-major `M × M` evaluation at `tau`; the zero matrix for `tau >= 1`.
    pub fn eval(&self, tau: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.order() * self.order()];
        self.eval_into(tau, &mut out);
        out
    }

    pub fn eval_into(&self, tau: f64, out: &mut [f64]) {
        let m = self.order();
        debug_assert_eq!(out.len(), m * m);
        let tau = tau.abs();
        if tau >= 1.0 {
            out.fill(0.0);
            return;
        }
        for i in 0..m {
            for j in i..m {
                let v = self.entries[i * m + j].eval(tau);
                out[i * m + j] = v;
                out[j * m + i] = v;
            }
        }
    }
}

pub fn compute_phi(basis: BasisSpec) -> PhiMatrix {
    let m = basis.order();
    let mut entries = Vec::with_capacity(m * m);
    match basis.family() {
        BasisFamily::Fourier => {
            for i in 0..m {
                for j in 0..m {
                    entries.push(ClosedFormEntry::Fourier {
                        s: i + j,
                        d: j as i64 - i as i64,
                    });
                }
            }
        }
        BasisFamily::Polynomial => {
            let table = polynomial_correlations(m);
            for i in 0..m {
                for j in 0..m {
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    entries.push(ClosedFormEntry::PolynomialInAbsT {
                        coeffs: table[a * m + b].to_f64_coeffs(),
                    });
                }
            }
        }
    }
    PhiMatrix { basis, entries }
}

/// Exact rational `Φ_ij(τ)` for monomials, filled for `i <= j` (row-major).
pub(crate) fn polynomial_correlations(m: usize) -> Vec<RationalPoly> {
    // (1 - 2τ)^p for p = 0..=2m
    let base = RationalPoly::linear(1, -2);
    let mut upper_pows = vec![RationalPoly::constant(int(1))];
    for p in 1..=2 * m {
        upper_pows.push(upper_pows[p - 1].mul(&base));
    }
    let one = RationalPoly::constant(int(1));

    // ∫_{-1}^{1-2τ} x^a (x+2τ)^b dx, expanding the shift binomially and
    // integrating term by term.
    let shifted_moment = |a: usize, b: usize| -> RationalPoly {
        let mut acc = RationalPoly::zero();
        for k in 0..=b {
            let p = a + k;
            let antideriv_at_upper = &upper_pows[p + 1];
            let at_lower = if (p + 1).is_multiple_of(2) {
                one.clone()
            } else {
                one.scale(&int(-1))
            };
            let definite = antideriv_at_upper
                .sub(&at_lower)
                .scale(&ratio(1, (p + 1) as i64));
            let coeff = num_rational::BigRational::from_integer(binomial(b, k) << (b - k));
            let shift = RationalPoly::monomial(coeff, b - k);
            acc = acc.add(&shift.mul(&definite));
        }
        acc
    };

    let half = ratio(1, 2);
    let mut table = vec![RationalPoly::zero(); m * m];
    for i in 0..m {
        for j in i..m {
            let sym = shifted_moment(i, j).add(&shifted_moment(j, i)).scale(&half);
            table[i * m + j] = sym;
        }
    }
    table
}

fn basis_value(family: BasisFamily, k: usize, x: f64) -> Complex64 {
    match family {
        BasisFamily::Polynomial => Complex64::new(x.powi(k as i32), 0.0),
        BasisFamily::Fourier => Complex64::from_polar(
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::PI * k as f64 * x,
        ),
    }
}

/// Numerical quadrature of the defining correlation integral for one entry.
///
/// Independent of the closed forms: it evaluates the basis functions directly
/// (complex exponentials for Fourier) and integrates adaptively to 1e-12.
pub fn phi_numeric_oracle(basis: BasisSpec, i: usize, j: usize, tau: f64) -> Result<f64> {
    let m = basis.order();
    if i >= m || j >= m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: i.max(j) + 1,
        });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau {tau} outside [0, 1]")));
    }
    let fam = basis.family();
    let shift = 2.0 * tau;
    let upper = 1.0 - 2.0 * tau.min(1.0);
    crate::quadrature::integrate_adaptive(-1.0, upper, 1e-12, |x| {
        let a = basis_value(fam, i, x).conj() * basis_value(fam, j, x + shift);
        let b = basis_value(fam, j, x) * basis_value(fam, i, x + shift).conj();
        0.5 * (a + b).re
    })
}

/// Numerical dimension of `span{Φ_ij}`: the rank of the matrix of sampled
/// entry functions on a uniform grid of [0, 1).
pub fn rank_dimension(phi: &PhiMatrix, grid_size: usize, tol: f64) -> Result<usize> {
    let m = phi.order();
    let cols = m * (m + 1) / 2;
    if grid_size < cols {
        return Err(Error::InvalidParameter(format!(
            "grid size {grid_size} smaller than the {cols} entry functions"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(
            "rank tolerance must be positive".into(),
        ));
    }
    let mut data = vec![0.0; grid_size * cols];
    for r in 0..grid_size {
        let tau = r as f64 / grid_size as f64;
        let mut c = 0;
        for i in 0..m {
            for j in i..m {
                data[r * cols + c] = phi.entry(i, j).eval(tau);
                c += 1;
            }
        }
    }
    let sv = linalg::singular_values(&data, grid_size, cols)?;
    let largest = sv.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * largest).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::make_basis;
    use num_traits::Zero;

    fn basis(f: BasisFamily, m: usize) -> BasisSpec {
        make_basis(f, m).unwrap()
    }

    #[test]
    fn fourier_phi_at_zero_is_identity() {
        for m in [1, 2, 5, 8] {
            let phi = compute_phi(basis(BasisFamily::Fourier, m));
            let v = phi.eval(0.0);
            for i in 0..m {
                for j in 0..m {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((v[i * m + j] - want).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn polynomial_order_one_is_triangle() {
        let phi = compute_phi(basis(BasisFamily::Polynomial, 1));
        assert_eq!(
            phi.entry(0, 0),
            &ClosedFormEntry::PolynomialInAbsT {
                coeffs: vec![2.0, -2.0]
            }
        );
        assert_eq!(phi.eval(0.25), vec![1.5]);
        assert_eq!(phi.eval(1.0), vec![0.0]);
        assert_eq!(phi.eval(3.0), vec![0.0]);
    }

    #[test]
    fn polynomial_order_two_cross_term_vanishes() {
        let exact = polynomial_correlations(2);
        assert!(exact[1].is_zero());
        // cross-check against the numeric oracle
        let b = basis(BasisFamily::Polynomial, 2);
        for k in 0..=10 {
            let tau = k as f64 / 10.0;
            assert!(phi_numeric_oracle(b, 0, 1, tau).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_order_one_matches_oracle_quarter() {
        let b = basis(BasisFamily::Fourier, 1);
        let phi = compute_phi(b);
        assert!((phi.eval(0.25)[0] - 0.75).abs() < 1e-15);
        assert!((phi_numeric_oracle(b, 0, 0, 0.25).unwrap() - 0.75).abs() < 1e-12);
        assert!((phi_numeric_oracle(b, 0, 0, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn oracle_vanishes_at_endpoint_and_checks_bounds() {
        for fam in [BasisFamily::Fourier, BasisFamily::Polynomial] {
            let b = basis(fam, 3);
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(phi_numeric_oracle(b, i, j, 1.0).unwrap(), 0.0);
                }
            }
            assert!(phi_numeric_oracle(b, 3, 0, 0.5).is_err());
            assert!(phi_numeric_oracle(b, 0, 0, 1.5).is_err());
        }
    }

    #[test]
    fn fourier_closed_form_matches_oracle_on_grid() {
        let b = basis(BasisFamily::Fourier, 4);
        let phi = compute_phi(b);
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..=100 {
                    let tau = k as f64 / 100.0;
                    let o = phi_numeric_oracle(b, i, j, tau).unwrap();
                    let c = phi.entry(i, j).eval(tau);
                    assert!((o - c).abs() <= 1e-8, "({i},{j}) tau={tau}: {o} vs {c}");
                }
            }
        }
    }

    #[test]
    fn polynomial_entries_vanish_at_one_and_respect_degree_bound() {
        for m in 1..=8 {
            let exact = polynomial_correlations(m);
            let one = int(1);
            for i in 0..m {
                for j in i..m {
                    let p = &exact[i * m + j];
                    assert!(p.eval(&one).is_zero(), "m={m} ({i},{j})");
                    if let Some(d) = p.degree() {
                        assert!(d < 2 * m);
                    }
                }
            }
        }
    }

    #[test]
    fn entries_are_symmetric() {
        for fam in [BasisFamily::Fourier, BasisFamily::Polynomial] {
            let phi = compute_phi(basis(fam, 4));
            for i in 0..4 {
                for j in 0..4 {
                    for tau in [0.0, 0.2, 0.7] {
                        assert_eq!(phi.entry(i, j).eval(tau), phi.entry(j, i).eval(tau));
                    }
                }
            }
        }
    }

    #[test]
    fn rank_small_cases() {
        // Off-diagonal Fourier entries are ±(sin 2πnτ - sin 2πmτ)/(2π(n-m)), so they
        // only span M-1 sines: e.g. Φ_12 = -2Φ_02 - Φ_01 exactly.
        let f3 = compute_phi(basis(BasisFamily::Fourier, 3));
        for k in 0..=100 {
            let tau = k as f64 / 100.0;
            let lhs = f3.entry(1, 2).eval(tau);
            let rhs = -2.0 * f3.entry(0, 2).eval(tau) - f3.entry(0, 1).eval(tau);
            assert!((lhs - rhs).abs() < 1e-14, "tau={tau}");
        }
        for m in 1..=8 {
            let r =
                rank_dimension(&compute_phi(basis(BasisFamily::Fourier, m)), 512, 1e-10).unwrap();
            assert_eq!(r, 2 * m - 1, "M={m}");
        }
        let r =
            rank_dimension(&compute_phi(basis(BasisFamily::Polynomial, 1)), 512, 1e-10).unwrap();
        assert_eq!(r, 1);
        let r =
            rank_dimension(&compute_phi(basis(BasisFamily::Polynomial, 2)), 512, 1e-10).unwrap();
        assert_eq!(r, 2);
        assert!(rank_dimension(&compute_phi(basis(BasisFamily::Fourier, 3)), 5, 1e-10).is_err());
    }
}
