//! Least-squares fitting of a compact kernel to a target kernel on `[-c, c]`.
//!
//! The fit minimizes `½ ΣR_ijkl A_ij A_kl - ΣB_ij A_ij` over PSD `A`, where
//! `R_ijkl = ⟨Φ_ij, Φ_kl⟩` and `B_ij = ⟨Φ_ij, K⟩` are inner products on
//! `L2([-c, c])`. The constant `‖K‖²` is dropped from the objective.

mod admm;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use crate::linalg::project_psd;
pub use admm::{solve_compact_approx, ApproxOptions, ApproxResult};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::kernel::{Kernel, PhiMatrix};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub panels: usize,
    pub nodes_per_panel: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            panels: 64,
            nodes_per_panel: 32,
        }
    }
}

impl QuadratureSpec {
    pub fn new(panels: usize, nodes_per_panel: usize) -> Result<Self> {
        let q = QuadratureSpec {
            panels,
            nodes_per_panel,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.panels < 1 || !(2..=128).contains(&self.nodes_per_panel) {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs panels >= 1 and 2..=128 nodes per panel, got {}x{}",
                self.panels, self.nodes_per_panel
            )));
        }
        Ok(())
    }

    pub fn doubled(&self) -> Self {
        QuadratureSpec {
            panels: 2 * self.panels,
            ..*self
        }
    }

    /// Composite nodes and weights on `[0, c]`.
    fn rule(&self, c: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        check_cutoff(c)?;
        Ok(GaussLegendre::new(self.nodes_per_panel).composite_points(0.0, c, self.panels))
    }
}

fn check_cutoff(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "cutoff must be positive and finite, got {c}"
        )));
    }
    Ok(())
}

/// `Φ(t/c)` at every node, row-major per node.
fn phi_table(phi: &PhiMatrix, c: f64, xs: &[f64]) -> Vec<f64> {
    let m2 = phi.order() * phi.order();
    let mut table = vec![0.0; xs.len() * m2];
    for (t, chunk) in xs.iter().zip(table.chunks_mut(m2)) {
        phi.eval_into(t / c, chunk);
    }
    table
}

/// `B_ij = 2∫_0^c K(t) Φ_ij(t/c) dt`, row-major `M × M`.
#[allow(non_snake_case)]
pub fn compute_B<K: Kernel + ?Sized>(
    phi: &PhiMatrix,
    target: &K,
    c: f64,
    q: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let (xs, ws) = q.rule(c)?;
    let kv: Vec<f64> = xs.iter().map(|&t| target.eval(t)).collect();
    Ok(project_b(phi, &phi_table(phi, c, &xs), &ws, &kv))
}

fn project_b(phi: &PhiMatrix, table: &[f64], ws: &[f64], kv: &[f64]) -> Vec<f64> {
    let m2 = phi.order() * phi.order();
    let mut b = vec![0.0; m2];
    for (node, chunk) in table.chunks(m2).enumerate() {
        let w = 2.0 * ws[node] * kv[node];
        for (bv, pv) in b.iter_mut().zip(chunk) {
            *bv += w * pv;
        }
    }
    b
}

/// `R_ijkl = 2∫_0^c Φ_ij(t/c) Φ_kl(t/c) dt`, stored densely at index
/// `((i·M + j)·M + k)·M + l`.
#[allow(non_snake_case)]
pub fn compute_R(phi: &PhiMatrix, c: f64, q: &QuadratureSpec) -> Result<Vec<f64>> {
    compute_R_with(phi, c, q, ExecMode::default())
}

#[allow(non_snake_case)]
pub fn compute_R_with(
    phi: &PhiMatrix,
    c: f64,
    q: &QuadratureSpec,
    mode: ExecMode,
) -> Result<Vec<f64>> {
    let (xs, ws) = q.rule(c)?;
    Ok(gram_tensor(phi.order(), &phi_table(phi, c, &xs), &ws, mode))
}

fn upper_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect()
}

fn gram_tensor(m: usize, table: &[f64], ws: &[f64], mode: ExecMode) -> Vec<f64> {
    let m2 = m * m;
    let pairs = upper_pairs(m);
    let np = pairs.len();
    // transpose to one contiguous weighted column per distinct entry
    let cols: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(i, j)| table.chunks(m2).map(|row| row[i * m + j]).collect())
        .collect();
    let weights: Vec<f64> = ws.iter().map(|w| 2.0 * w).collect();
    let upper: Vec<Vec<f64>> = exec::map_range(mode, np, |p| {
        let wp: Vec<f64> = cols[p].iter().zip(&weights).map(|(a, w)| a * w).collect();
        (p..np)
            .map(|q| wp.iter().zip(&cols[q]).map(|(a, b)| a * b).sum())
            .collect()
    });
    let mut r = vec![0.0; m2 * m2];
    for (p, &(i, j)) in pairs.iter().enumerate() {
        for (off, &(k, l)) in pairs[p..].iter().enumerate() {
            let v = upper[p][off];
            for (a, b) in [(i, j), (j, i)] {
                for (c, d) in [(k, l), (l, k)] {
                    r[(a * m + b) * m2 + c * m + d] = v;
                    r[(c * m + d) * m2 + a * m + b] = v;
                }
            }
        }
    }
    r
}

/// Everything the solver needs, plus node values for reporting the L2 error.
#[derive(Debug, Clone)]
pub struct ApproxProblem {
    phi: Arc<PhiMatrix>,
    cutoff: f64,
    r: Vec<f64>,
    b: Vec<f64>,
    phi0: Vec<f64>,
    k0: f64,
    weights: Vec<f64>,
    phi_nodes: Vec<f64>,
    target_nodes: Vec<f64>,
}

impl ApproxProblem {
    pub fn new<K: Kernel + ?Sized>(
        phi: Arc<PhiMatrix>,
        target: &K,
        cutoff: f64,
        q: &QuadratureSpec,
    ) -> Result<Self> {
        Self::new_with(phi, target, cutoff, q, ExecMode::default())
    }

    pub fn new_with<K: Kernel + ?Sized>(
        phi: Arc<PhiMatrix>,
        target: &K,
        cutoff: f64,
        q: &QuadratureSpec,
        mode: ExecMode,
    ) -> Result<Self> {
        let (xs, ws) = q.rule(cutoff)?;
        let table = phi_table(&phi, cutoff, &xs);
        let kv: Vec<f64> = xs.iter().map(|&t| target.eval(t)).collect();
        if kv.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "target kernel is not finite on [0, c]".into(),
            ));
        }
        let b = project_b(&phi, &table, &ws, &kv);
        let r = gram_tensor(phi.order(), &table, &ws, mode);
        let phi0 = phi.eval(0.0);
        Ok(ApproxProblem {
            cutoff,
            r,
            b,
            phi0,
            k0: target.at_zero(),
            weights: ws,
            phi_nodes: table,
            target_nodes: kv,
            phi,
        })
    }

    pub fn phi(&self) -> &Arc<PhiMatrix> {
        &self.phi
    }

    pub fn order(&self) -> usize {
        self.phi.order()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn phi0(&self) -> &[f64] {
        &self.phi0
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// `½ ΣR_ijkl A_ij A_kl - ΣB_ij A_ij`.
    pub fn objective(&self, a: &[f64]) -> f64 {
        let m2 = a.len();
        let mut quad = 0.0;
        for (p, ap) in a.iter().enumerate() {
            if *ap == 0.0 {
                continue;
            }
            let row = &self.r[p * m2..(p + 1) * m2];
            quad += ap * row.iter().zip(a).map(|(r, x)| r * x).sum::<f64>();
        }
        0.5 * quad - self.b.iter().zip(a).map(|(b, x)| b * x).sum::<f64>()
    }

    /// L2 distance on `[-c, c]` between `tr(AΦ(t/c))` and the target.
    pub fn l2_error(&self, a: &[f64]) -> f64 {
        let m2 = a.len();
        let sum: f64 = self
            .phi_nodes
            .chunks(m2)
            .zip(&self.weights)
            .zip(&self.target_nodes)
            .map(|((row, w), k)| {
                let approx: f64 = row.iter().zip(a).map(|(p, x)| p * x).sum();
                w * (approx - k).powi(2)
            })
            .sum();
        (2.0 * sum).sqrt()
    }
}

/// `sqrt(2∫_0^c (tr(AΦ(t/c)) - K(t))² dt)`.
pub fn l2_error<K: Kernel + ?Sized>(
    a: &[f64],
    phi: &PhiMatrix,
    target: &K,
    c: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    let m = phi.order();
    if a.len() != m * m {
        return Err(Error::DimensionMismatch {
            expected: m * m,
            got: a.len(),
        });
    }
    let (xs, ws) = q.rule(c)?;
    let mut buf = vec![0.0; m * m];
    let mut sum = 0.0;
    for (t, w) in xs.iter().zip(&ws) {
        phi.eval_into(t / c, &mut buf);
        let approx: f64 = buf.iter().zip(a).map(|(p, x)| p * x).sum();
        sum += w * (approx - target.eval(*t)).powi(2);
    }
    Ok((2.0 * sum).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{
        compute_phi, make_basis, BasisFamily, CompactKernel, TargetFamily, TargetKernel,
    };
    use crate::linalg::sym_eigenvalues_mat;
    use faer::Mat;

    fn phi(family: BasisFamily, m: usize) -> Arc<PhiMatrix> {
        Arc::new(compute_phi(make_basis(family, m).unwrap()))
    }

    struct Zero;
    impl Kernel for Zero {
        fn eval(&self, _: f64) -> f64 {
            0.0
        }
    }

    #[test]
    fn b_matches_analytic_values() {
        let q = QuadratureSpec::default();
        let p = phi(BasisFamily::Fourier, 3);
        assert!(compute_B(&p, &Zero, 2.0, &q)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));

        let p1 = phi(BasisFamily::Fourier, 1);
        let w1 = TargetKernel::new(TargetFamily::Wendland1, 1.0, 1.0).unwrap();
        let b = compute_B(&p1, &w1, 1.0, &q).unwrap();
        assert!((b[0] - 2.0 / 3.0).abs() < 1e-14);
        let r = compute_R(&p1, 1.0, &q).unwrap();
        assert!((r[0] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn panel_doubling_is_stable() {
        let q = QuadratureSpec::default();
        for family in [BasisFamily::Fourier, BasisFamily::Polynomial] {
            let p = phi(family, 4);
            for tf in [
                TargetFamily::SquaredExponential,
                TargetFamily::OrnsteinUhlenbeck,
                TargetFamily::Sinc,
            ] {
                let t = TargetKernel::new(tf, 1.0, 1.0).unwrap();
                let b1 = compute_B(&p, &t, 5.0, &q).unwrap();
                let b2 = compute_B(&p, &t, 5.0, &q.doubled()).unwrap();
                for (x, y) in b1.iter().zip(&b2) {
                    assert!((x - y).abs() < 1e-10, "{family:?} {tf:?}: {x} vs {y}");
                }
            }
            let r1 = compute_R(&p, 5.0, &q).unwrap();
            let r2 = compute_R(&p, 5.0, &q.doubled()).unwrap();
            assert!(r1.iter().zip(&r2).all(|(x, y)| (x - y).abs() < 1e-10));
        }
    }

    #[test]
    fn r_symmetries_and_gram_psd() {
        let q = QuadratureSpec::default();
        for family in [BasisFamily::Fourier, BasisFamily::Polynomial] {
            let m = 3;
            let p = phi(family, m);
            let r = compute_R(&p, 2.0, &q).unwrap();
            let seq = compute_R_with(&p, 2.0, &q, ExecMode::Sequential).unwrap();
            assert_eq!(r, seq);
            let idx = |i: usize, j: usize, k: usize, l: usize| ((i * m + j) * m + k) * m + l;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            let v = r[idx(i, j, k, l)];
                            assert_eq!(v, r[idx(k, l, i, j)]);
                            assert_eq!(v, r[idx(j, i, k, l)]);
                            assert_eq!(v, r[idx(i, j, l, k)]);
                        }
                    }
                }
            }
            let n = m * m;
            let unfolded = Mat::from_fn(n, n, |a, b| r[a * n + b]);
            let vals = sym_eigenvalues_mat(&unfolded).unwrap();
            assert!(vals[0] >= -1e-10, "{family:?}: {}", vals[0]);
        }
    }

    #[test]
    fn l2_error_oracles() {
        let q = QuadratureSpec::default();
        let p = phi(BasisFamily::Fourier, 2);
        let a = vec![1.0, 0.2, 0.2, 0.7];
        let k = CompactKernel::with_phi(p.clone(), a.clone(), 3.0).unwrap();
        assert!(l2_error(&a, &p, &k, 3.0, &q).unwrap() < 1e-9);

        let se = TargetKernel::new(TargetFamily::SquaredExponential, 1.0, 1.0).unwrap();
        let got = l2_error(&[0.0; 4], &p, &se, 5.0, &q).unwrap();
        let want = (2.0
            * crate::quadrature::integrate_adaptive(0.0, 5.0, 1e-14, |t| (-2.0 * t * t).exp())
                .unwrap())
        .sqrt();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");

        let prob = ApproxProblem::new(p.clone(), &se, 5.0, &q).unwrap();
        assert!((prob.l2_error(&a) - l2_error(&a, &p, &se, 5.0, &q).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn objective_is_half_squared_error_minus_constant() {
        let q = QuadratureSpec::default();
        let p = phi(BasisFamily::Polynomial, 3);
        let ou = TargetKernel::new(TargetFamily::OrnsteinUhlenbeck, 1.5, 0.7).unwrap();
        let prob = ApproxProblem::new(p.clone(), &ou, 2.0, &q).unwrap();
        let norm_sq = prob.l2_error(&[0.0; 9]).powi(2);
        let a = vec![0.3, 0.1, 0.0, 0.1, 0.4, -0.05, 0.0, -0.05, 0.2];
        let lhs = 0.5 * prob.l2_error(&a).powi(2);
        let rhs = prob.objective(&a) + 0.5 * norm_sq;
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = phi(BasisFamily::Fourier, 2);
        assert!(compute_R(&p, 0.0, &QuadratureSpec::default()).is_err());
        assert!(QuadratureSpec::new(0, 10).is_err());
        assert!(QuadratureSpec::new(4, 1).is_err());
        assert!(QuadratureSpec::new(4, 129).is_err());
    }
}
