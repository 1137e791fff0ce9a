use crate::error::{Error, Result};

/// A set of `n` points in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim * (coords.len() / dim + 1),
                got: coords.len(),
            });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_1d(xs: Vec<f64>) -> Result<Self> {
        Self::new(1, xs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Strictly ascending 1-D coordinates.
    pub fn is_sorted_1d(&self) -> bool {
        self.dim == 1 && self.coords.windows(2).all(|w| w[0] < w[1])
    }

    /// Uniform-norm distance between points `i` of `self` and `j` of `other`.
    pub fn sup_distance(&self, i: usize, other: &Points, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(other.point(j))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Writes `a_i - b_i` into `out`.
pub(crate) fn offset_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x - y;
    }
}
