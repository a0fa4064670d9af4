//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FdtdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot stamp source/probe: {0}")]
    Stamp(String),

    #[error("state diverged at step {step} (max |x| = {max_abs:.3e})")]
    Divergence { step: usize, max_abs: f64 },

    #[error("singular operator: {0}")]
    SingularOperator(String),

    #[error("iterative solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverFailure { residual: f64, iterations: usize },

    #[error("expansion points alias: f_max*dt = {0} >= 1/2")]
    Aliasing(f64),

    #[error("degenerate source: {0}")]
    DegenerateSource(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("degenerate reference: {0}")]
    DegenerateReference(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FdtdError>;
