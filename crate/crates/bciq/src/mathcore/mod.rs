//! Dense matrix primitives, covariance estimation, symmetric and generalized
//! eigensolvers, and a seedable deterministic PRNG.
//!
//! Matrices are stored row-major as flat `Vec<f64>`. Everything here is
//! value-semantic and immutable after construction; all operations are pure
//! functions of their inputs (plus an explicit [`Rng`] where randomness is
//! involved), so they can be called from multiple threads freely.

mod eigen;
mod matrix;
mod rng;

pub use eigen::{generalized_eigh, jacobi_eigh, EigenDecomposition};
pub use matrix::{covariance, Matrix, SpdMatrix};
pub use rng::Rng;

use thiserror::Error;

/// Errors from the numerical substrate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    /// Input too small or otherwise degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Input contains non-finite values or violates a structural requirement.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Iterative solver failed to converge.
    #[error("no convergence after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    Convergence { sweeps: usize, off_norm: f64 },

    /// Matrix is numerically singular where a definite one is required.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
