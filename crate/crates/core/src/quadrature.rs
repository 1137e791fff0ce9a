//! Gauss–Legendre quadrature: fixed rules, composite rules over equal panels,
//! and an adaptive bisection driver.

use crate::error::{Error, Result};

/// Gauss–Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule; nodes are roots of P_n found by Newton's method.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        // roots are symmetric; compute the upper half and mirror
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    dp = legendre_with_derivative(n, x).1;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Absolute nodes and weights of the composite rule over `panels` equal
    /// subintervals of [a, b]. Useful when many integrands share the nodes.
    pub fn composite_points(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let h = (b - a) / panels as f64;
        let mut xs = Vec::with_capacity(panels * self.len());
        let mut ws = Vec::with_capacity(panels * self.len());
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                xs.push(mid + 0.5 * h * x);
                ws.push(0.5 * h * w);
            }
        }
        (xs, ws)
    }

    pub fn integrate_composite<F: Fn(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + h * p as f64;
                self.integrate(lo, lo + h, &f)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

const ADAPTIVE_ORDER: usize = 20;
const ADAPTIVE_MAX_DEPTH: usize = 40;

/// Adaptive Gauss–Legendre integration to absolute tolerance `tol`.
///
/// Each interval is compared against the sum over its two halves and bisected
/// until they agree. Fails with [`Error::QuadratureNonConvergence`] when the
/// depth limit is hit.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(a: f64, b: f64, tol: f64, f: F) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = GaussLegendre::new(ADAPTIVE_ORDER);
    let whole = rule.integrate(a, b, &f);
    adaptive_step(&rule, &f, a, b, whole, tol, 0)
}

fn adaptive_step<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, f);
    let right = rule.integrate(m, b, f);
    let refined = left + right;
    if (refined - whole).abs() <= tol {
        return Ok(refined);
    }
    if depth >= ADAPTIVE_MAX_DEPTH {
        return Err(Error::QuadratureNonConvergence {
            tol,
            estimate: refined,
        });
    }
    let l = adaptive_step(rule, f, a, m, left, 0.5 * tol, depth + 1)?;
    let r = adaptive_step(rule, f, m, b, right, 0.5 * tol, depth + 1)?;
    Ok(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_symmetric() {
        for n in [1, 2, 5, 32, 128] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
            for i in 0..n {
                assert!((r.nodes()[i] + r.nodes()[n - 1 - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let r = GaussLegendre::new(6);
        // ∫_0^2 x^11 dx = 2^12 / 12
        let got = r.integrate(0.0, 2.0, |x| x.powi(11));
        let want = 4096.0 / 12.0;
        assert!((got - want).abs() < 1e-10 * want);
    }

    #[test]
    fn composite_matches_closed_form() {
        let r = GaussLegendre::new(8);
        let got = r.integrate_composite(0.0, 5.0, 16, |t| (-2.0 * t * t).exp());
        // 2∫_0^5 e^{-2t^2} dt ~ sqrt(pi/2) for practical purposes (tail ~1e-23)
        let want = 0.5 * (std::f64::consts::PI / 2.0).sqrt();
        assert!((got - want).abs() < 1e-14);
        let (xs, ws) = r.composite_points(0.0, 5.0, 16);
        let alt: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| w * (-2.0 * x * x).exp())
            .sum();
        assert!((alt - got).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_oscillation_and_empty_interval() {
        let got = integrate_adaptive(0.0, 10.0, 1e-12, |x| (20.0 * x).sin()).unwrap();
        let want = (1.0 - (200.0f64).cos()) / 20.0;
        assert!((got - want).abs() < 1e-11);
        assert_eq!(integrate_adaptive(1.0, 1.0, 1e-12, |x| x).unwrap(), 0.0);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        let err = integrate_adaptive(0.0, 1.0, 1e-300, |x| (1.0 / (x + 1e-300)).sin()).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }
}
