use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range: t_open = {t_open} must be < t_close = {t_close}")]
    InvalidRange { t_open: f64, t_close: f64 },

    #[error("invalid knot count {0}: need at least 2 distinct knots")]
    InvalidKnotCount(usize),

    #[error("time {t} outside [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative argument {0}")]
    NegativeArgument(f64),

    #[error("value {0} is not a nonnegative integer")]
    NonInteger(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate chain: {0}")]
    Degenerate(String),

    #[error("precision matrix is not positive definite (pivot {index})")]
    Factorization { index: usize },

    #[error("Newton iterations did not converge after {iterations} steps (gradient max-norm {gradient})")]
    NonConvergence { iterations: usize, gradient: f64 },

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidRange { .. } => "invalid-range",
            Error::InvalidKnotCount(_) => "invalid-knot-count",
            Error::OutOfDomain { .. } => "out-of-domain",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NegativeArgument(_) => "negative-argument",
            Error::NonInteger(_) => "non-integer",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Degenerate(_) => "degenerate-chain",
            Error::Factorization { .. } => "factorization-failure",
            Error::NonConvergence { .. } => "non-convergence",
            Error::ModelViolation(_) => "model-violation",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}
