use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no extremes at this gamma (n = {n}, gamma = {gamma})")]
    NoExtremes { n: usize, gamma: f64 },

    #[error("zero-norm row {0} cannot be normalized")]
    ZeroNorm(usize),

    #[error("{method} did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("overlapping corner cut: tau = {tau} is below {min} for p = {p}")]
    OverlappingCornerCut { p: usize, tau: f64, min: f64 },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
