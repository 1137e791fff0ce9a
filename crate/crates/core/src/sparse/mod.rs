//! Sparse kernel matrices and the matrix-free solvers that consume them.

mod cg;
mod csr;
mod hutchinson;
mod pattern;

pub use cg::{conjugate_gradient, CgOptions, CgStats, Preconditioner};
pub use csr::{assemble, assemble_with, SparseKernelMatrix};
pub use hutchinson::{hutchinson_trace, hutchinson_traces, probe_vector, TraceEstimate};
pub use pattern::{
    dense_pattern, sparsity_pattern_generic, sparsity_pattern_sorted, SparsityPattern,
};
