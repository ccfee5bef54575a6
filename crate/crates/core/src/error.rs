//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by solvers, configuration parsing and I/O.
///
/// Pure stencil operations are total functions and do not return errors;
/// misuse (mismatched grids, invalid exponents) is caught by the constructors
/// of the domain types or by debug assertions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("linear solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolveDiverged { iterations: usize, residual: f64 },

    #[error("time step {dt:.3e} violates the stability bound {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("initial data rejected: {0}")]
    Admissibility(String),

    #[error("decay fit failed: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
