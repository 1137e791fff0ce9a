use crate::error::{Error, Result};
use crate::points::Points;

/// CSR sparsity structure of a symmetric matrix with a full diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

impl SparsityPattern {
    /// Validates CSR arrays: sorted unique columns, full diagonal, structural symmetry.
    pub fn from_csr(n: usize, row_offsets: Vec<usize>, col_indices: Vec<usize>) -> Result<Self> {
        if row_offsets.len() != n + 1 || row_offsets[n] != col_indices.len() || row_offsets[0] != 0
        {
            return Err(Error::InvalidParameter("malformed CSR offsets".into()));
        }
        let p = Self {
            n,
            row_offsets,
            col_indices,
        };
        for i in 0..n {
            let row = p.row(i);
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&j| j >= n) {
                return Err(Error::InvalidParameter(format!(
                    "row {i} columns not sorted/unique"
                )));
            }
            if row.binary_search(&i).is_err() {
                return Err(Error::InvalidParameter(format!(
                    "row {i} is missing its diagonal"
                )));
            }
            if let Some(&j) = row.iter().find(|&&j| !p.contains(j, i)) {
                return Err(Error::InvalidParameter(format!(
                    "pattern not symmetric at ({i}, {j})"
                )));
            }
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    /// Position of `(i, j)` in the value array.
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        self.row(i)
            .binary_search(&j)
            .ok()
            .map(|k| self.row_offsets[i] + k)
    }
}

fn check_cutoff(cutoff: f64) -> Result<()> {
    if !(cutoff > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff must be positive, got {cutoff}"
        )));
    }
    Ok(())
}

/// Pattern `{(i, j) : |x_i - x_j| < cutoff}` for strictly ascending 1-D
/// points, built with a sliding window in `O(n + nnz)`.
pub fn sparsity_pattern_sorted(points: &[f64], cutoff: f64) -> Result<SparsityPattern> {
    check_cutoff(cutoff)?;
    for (k, w) in points.windows(2).enumerate() {
        if w[1] == w[0] {
            return Err(Error::DuplicatePoints { index: k + 1 });
        }
        if !(w[1] > w[0]) {
            return Err(Error::UnsortedInput { index: k + 1 });
        }
    }
    let n = points.len();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    row_offsets.push(0);
    let (mut lo, mut hi) = (0usize, 0usize);
    for i in 0..n {
        let xi = points[i];
        while xi - points[lo] >= cutoff {
            lo += 1;
        }
        if hi < i + 1 {
            hi = i + 1;
        }
        while hi < n && points[hi] - xi < cutoff {
            hi += 1;
        }
        col_indices.extend(lo..hi);
        row_offsets.push(col_indices.len());
    }
    Ok(SparsityPattern {
        n,
        row_offsets,
        col_indices,
    })
}

/// Brute-force pattern under the uniform norm, `max_k |x_ik - x_jk| < cutoff`.
pub fn sparsity_pattern_generic(points: &Points, cutoff: f64) -> Result<SparsityPattern> {
    check_cutoff(cutoff)?;
    let n = points.len();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    row_offsets.push(0);
    for i in 0..n {
        for j in 0..n {
            if i == j || points.sup_distance(i, points, j) < cutoff {
                col_indices.push(j);
            }
        }
        row_offsets.push(col_indices.len());
    }
    Ok(SparsityPattern {
        n,
        row_offsets,
        col_indices,
    })
}

pub fn dense_pattern(n: usize) -> SparsityPattern {
    SparsityPattern {
        n,
        row_offsets: (0..=n).map(|i| i * n).collect(),
        col_indices: (0..n).flat_map(|_| 0..n).collect(),
    }
}
