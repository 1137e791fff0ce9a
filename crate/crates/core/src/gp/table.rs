use std::sync::Arc;

use super::posterior::build_pattern;
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::kernel::PhiMatrix;
use crate::points::Points;
use crate::sparse::{SparseKernelMatrix, SparsityPattern};

/// `Φ_ij(|Δ_l|/c)` for every stored pair of a sparsity pattern, every
/// coordinate `l` and every `i <= j`.
///
/// The pattern and these values depend only on the inputs and the cutoff, so
/// one table serves every gradient step of a fit at fixed `c`.
#[derive(Debug, Clone)]
pub struct PairTable {
    pattern: Arc<SparsityPattern>,
    m: usize,
    dim: usize,
    upper: Vec<(usize, usize)>,
    /// `[entry][coordinate][upper pair]`
    values: Vec<f64>,
}

impl PairTable {
    pub fn new(phi: &PhiMatrix, cutoff: f64, x: &Points, mode: ExecMode) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!("cutoff must be positive, got {cutoff}")));
        }
        let pattern = Arc::new(build_pattern(x, cutoff)?);
        let m = phi.order();
        let dim = x.dim();
        let upper: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
        let np = upper.len();
        let stride = dim * np;
        let mut values = vec![0.0; pattern.nnz() * stride];
        let rows: Vec<Vec<f64>> = exec::map_range(mode, x.len(), |a| {
            let mut buf = vec![0.0; m * m];
            let cols = pattern.row(a);
            let mut out = vec![0.0; cols.len() * stride];
            for (k, &b) in cols.iter().enumerate() {
                for l in 0..dim {
                    let tau = (x.point(a)[l] - x.point(b)[l]).abs() / cutoff;
                    phi.eval_into(tau, &mut buf);
                    for (p, &(i, j)) in upper.iter().enumerate() {
                        out[k * stride + l * np + p] = buf[i * m + j];
                    }
                }
            }
            out
        });
        for (a, row) in rows.into_iter().enumerate() {
            let start = pattern.row_offsets()[a] * stride;
            values[start..start + row.len()].copy_from_slice(&row);
        }
        Ok(PairTable {
            pattern,
            m,
            dim,
            upper,
            values,
        })
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn order(&self) -> usize {
        self.m
    }

    fn stride(&self) -> usize {
        self.dim * self.upper.len()
    }

    /// Per-coordinate kernel factors `tr(AΦ(τ_l))` of one stored entry.
    fn factors(&self, k: usize, weights: &[f64], out: &mut [f64]) {
        let np = self.upper.len();
        let base = k * self.stride();
        for (l, f) in out.iter_mut().enumerate() {
            let vals = &self.values[base + l * np..base + (l + 1) * np];
            *f = vals.iter().zip(weights).map(|(v, w)| v * w).sum();
        }
    }

    /// `A_ij` folded onto the upper triangle (off-diagonals doubled).
    fn upper_weights(&self, a: &[f64]) -> Vec<f64> {
        self.upper
            .iter()
            .map(|&(i, j)| if i == j { a[i * self.m + i] } else { 2.0 * a[i * self.m + j] })
            .collect()
    }

    /// Stored kernel values `Π_l tr(AΦ(τ_l))`, noise excluded.
    pub fn kernel_values(&self, a: &[f64], mode: ExecMode) -> Vec<f64> {
        let w = self.upper_weights(a);
        let dim = self.dim;
        exec::map_range(mode, self.pattern.nnz(), |k| {
            let mut f = vec![0.0; dim];
            self.factors(k, &w, &mut f);
            f.iter().product()
        })
    }

    pub fn assemble(&self, a: &[f64], noise: f64, mode: ExecMode) -> SparseKernelMatrix {
        let mut values = self.kernel_values(a, mode);
        for i in 0..self.pattern.n() {
            let k = self.pattern.index_of(i, i).expect("pattern has a diagonal");
            values[k] += noise;
        }
        SparseKernelMatrix::from_parts(self.pattern.clone(), values, noise)
    }

    /// `G_ij = Σ_k w_k ∂K_k/∂A_ij` over stored entries, as a full symmetric
    /// `M × M` matrix. `weight(row, col)` gives `w_k`.
    pub fn contract<W>(&self, a: &[f64], weight: W) -> Vec<f64>
    where
        W: Fn(usize, usize) -> f64,
    {
        let np = self.upper.len();
        let dim = self.dim;
        let aw = self.upper_weights(a);
        let mut acc = vec![0.0; np];
        let mut f = vec![0.0; dim];
        let offsets = self.pattern.row_offsets();
        let cols = self.pattern.col_indices();
        for row in 0..self.pattern.n() {
            for k in offsets[row]..offsets[row + 1] {
                let w = weight(row, cols[k]);
                if w == 0.0 {
                    continue;
                }
                let base = k * self.stride();
                if dim == 1 {
                    for (s, v) in acc.iter_mut().zip(&self.values[base..base + np]) {
                        *s += w * v;
                    }
                    continue;
                }
                // product rule over coordinates
                self.factors(k, &aw, &mut f);
                for l in 0..dim {
                    let others: f64 = f.iter().enumerate().filter(|&(o, _)| o != l).map(|(_, v)| v).product();
                    let coef = w * others;
                    if coef == 0.0 {
                        continue;
                    }
                    let vals = &self.values[base + l * np..base + (l + 1) * np];
                    for (s, v) in acc.iter_mut().zip(vals) {
                        *s += coef * v;
                    }
                }
            }
        }
        let m = self.m;
        let mut g = vec![0.0; m * m];
        for (p, &(i, j)) in self.upper.iter().enumerate() {
            g[i * m + j] = acc[p];
            g[j * m + i] = acc[p];
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_basis, BasisFamily, CompactKernel, Kernel};
    use crate::sparse::assemble;

    #[test]
    fn assembly_matches_direct_evaluation() {
        let b = make_basis(BasisFamily::Polynomial, 3).unwrap();
        let a = vec![1.0, 0.3, -0.1, 0.3, 0.7, 0.2, -0.1, 0.2, 0.4];
        let k = CompactKernel::new(b, a.clone(), 1.7).unwrap();
        for dim in [1usize, 2] {
            let n = 40;
            let coords: Vec<f64> = (0..n * dim).map(|i| (i as f64 * 0.731).fract() * 4.0 + i as f64 * 0.01).collect();
            let mut coords = coords;
            if dim == 1 {
                coords.sort_by(f64::total_cmp);
            }
            let pts = Points::new(dim, coords).unwrap();
            let table = PairTable::new(k.phi(), 1.7, &pts, ExecMode::default()).unwrap();
            let via_table = table.assemble(&a, 0.3, ExecMode::default());
            let direct = assemble(&k, &pts, table.pattern().clone(), 0.3).unwrap();
            for (x, y) in via_table.values().iter().zip(direct.values()) {
                assert!((x - y).abs() < 1e-13, "{x} vs {y}");
            }
        }
        assert!(k.at_zero() > 0.0);
    }

    #[test]
    fn contraction_is_the_derivative() {
        let b = make_basis(BasisFamily::Fourier, 2).unwrap();
        let a = vec![0.9, 0.2, 0.2, 0.5];
        let k = CompactKernel::new(b, a.clone(), 1.5).unwrap();
        let coords: Vec<f64> = (0..60).map(|i| (i as f64 * 0.377).fract() * 3.0).collect();
        let pts = Points::new(2, coords).unwrap();
        let table = PairTable::new(k.phi(), 1.5, &pts, ExecMode::default()).unwrap();
        let w = |r: usize, c: usize| ((r * 3 + c) % 7) as f64 - 3.0;
        let g = table.contract(&a, w);
        let total = |a: &[f64]| -> f64 {
            let v = table.kernel_values(a, ExecMode::Sequential);
            let mut s = 0.0;
            for r in 0..pts.len() {
                for (idx, &c) in table.pattern().row(r).iter().enumerate() {
                    s += w(r, c) * v[table.pattern().row_offsets()[r] + idx];
                }
            }
            s
        };
        let h = 1e-6;
        // symmetric perturbations: d/dε of A + ε(E_ij + E_ji) is G_ij + G_ji
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let mut ap = a.clone();
            let mut am = a.clone();
            for (r, c) in [(i, j), (j, i)] {
                ap[r * 2 + c] += h;
                am[r * 2 + c] -= h;
                if i == j {
                    break;
                }
            }
            let fd = (total(&ap) - total(&am)) / (2.0 * h);
            let want = if i == j { g[i * 2 + i] } else { g[i * 2 + j] + g[j * 2 + i] };
            assert!((fd - want).abs() <= 1e-6 * fd.abs().max(1.0), "({i},{j}): {fd} vs {want}");
        }
    }
}
