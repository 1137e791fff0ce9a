use thiserror::Error;

use crate::approx::ApproxResult;
use crate::sparse::CgStats;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis order {order} outside [1, {max}]")]
    OrderOutOfRange { order: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameter matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("adaptive quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    QuadratureNonConvergence { tol: f64, estimate: f64 },

    #[error("symmetric eigendecomposition failed to converge")]
    EigenFailure,

    #[error("solver hit the iteration cap ({}) before converging", .0.iterations)]
    MaxIterationsExceeded(Box<ApproxResult>),

    #[error("peak-matching constraint cannot be satisfied: {0}")]
    InfeasibleConstraint(String),

    #[error("input points are not sorted ascending (first violation at index {index})")]
    UnsortedInput { index: usize },

    #[error("duplicate input point at index {index}")]
    DuplicatePoints { index: usize },

    #[error("sparsity pattern is missing pair ({row}, {col}) that lies inside the kernel support")]
    PatternTooSmall { row: usize, col: usize },

    #[error(
        "conjugate gradient breakdown at iteration {iteration}: operator is not positive definite"
    )]
    BreakdownDetected { iteration: usize },

    #[error(
        "conjugate gradient did not converge: {} iterations, relative residual {:e}",
        .0.iterations,
        .0.final_residual_norm
    )]
    CgNotConverged(CgStats),

    #[error("matrix is not positive definite (Cholesky failed at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("every cutoff candidate diverged during fitting")]
    AllCutoffsFailed,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
