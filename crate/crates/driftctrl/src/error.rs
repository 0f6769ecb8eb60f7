//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by solvers, simulators, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched matrix or vector dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix required to be symmetric positive definite is not.
    #[error("not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A matrix required to be stable has an eigenvalue with
    /// non-negative real part.
    #[error("matrix is not stable (margin {margin:.3e})")]
    NotStable { margin: f64 },

    /// No stabilizing feedback could be constructed for the pair (A, B).
    #[error("pair (A, B) is not stabilizable: {0}")]
    NotStabilizable(String),

    /// The Riccati iteration exhausted its budget without converging.
    #[error("Riccati iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    RiccatiDivergence { residual: f64, iterations: usize },

    /// A linear system or factorization is too ill-conditioned to trust.
    #[error("ill-conditioned: condition number {cond:.3e} exceeds {limit:.3e}")]
    IllConditioned { cond: f64, limit: f64 },

    /// An eigenvector basis is numerically defective.
    #[error("near-defective eigenvector basis (condition {cond:.3e}); the non-diagonalizable case is out of scope")]
    NearDefective { cond: f64 },

    /// Invalid configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two trajectory logs cannot be compared pathwise.
    #[error("pairing error: {0}")]
    Pairing(String),

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input collection is empty where data is required.
    #[error("empty input: {0}")]
    Empty(String),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
