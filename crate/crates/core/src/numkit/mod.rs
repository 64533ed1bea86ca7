//! Dense linear algebra, least squares, and seeded Gaussian sampling.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`; matrices are the row-major [`Mat`].

mod eig;
mod lstsq;
mod matrix;
mod rng;
mod sum;

pub use eig::{sym_eig, SymEigen, DEFAULT_TOLERANCE as EIG_TOLERANCE};
pub use lstsq::lstsq;
pub use matrix::{dot, norm, Mat};
pub use rng::RandomSource;
pub use sum::NeumaierSum;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty matrix")]
    Empty,
    #[error("underdetermined system: {rows} rows for {cols} unknowns")]
    Underdetermined { rows: usize, cols: usize },
    #[error("design matrix is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NotConverged { sweeps: usize },
}
