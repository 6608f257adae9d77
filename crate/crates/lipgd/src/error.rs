//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by library operations.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {what} at step {step}")]
    NonFinite { what: String, step: usize },

    #[error("hybrid_min mode requires a Lip(R_S) estimate")]
    MissingLipEstimate,

    #[error("convergence check needs at least two iteration budgets")]
    InsufficientBudgets,

    #[error("missing column in log: {0}")]
    MissingColumn(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
