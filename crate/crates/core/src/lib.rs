//! Gaussian processes with learnable compactly supported kernels.
//!
//! A kernel is `K(t) = tr(A Φ(|t|/c))` for a PSD matrix `A`, a cutoff `c`, and the
//! matrix of basis autocorrelations `Φ`. Compact support makes Gram matrices
//! sparse, so inference runs through CSR storage and conjugate gradients.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod approx;
pub mod error;
pub mod exec;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod points;
pub mod poly;
pub mod quadrature;
pub mod sparse;

pub use error::{Error, Result};
pub use exec::ExecMode;
pub use points::Points;
