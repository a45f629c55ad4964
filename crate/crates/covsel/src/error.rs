use thiserror::Error;

/// Errors shared across the estimators and generators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (smallest eigenvalue {min_eig:.6e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("variable {index} is degenerate (non-positive variance {value:.6e})")]
    DegenerateVariable { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },

    #[error("matrix is not symmetric: entry ({i},{j}) = {upper:.6e} but ({j},{i}) = {lower:.6e}")]
    NotSymmetric { i: usize, j: usize, upper: f64, lower: f64 },

    #[error("column {col} infeasible: constraint residual {residual:.6e} exceeds {bound:.6e}")]
    Infeasible { col: usize, residual: f64, bound: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
