use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DunklError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("series failed to converge after {terms} terms (alpha={alpha}, t={t})")]
    SeriesNonConvergence { alpha: f64, t: f64, terms: usize },
    #[error("hypothesis not met: {0}")]
    Hypothesis(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, DunklError>;

impl From<std::io::Error> for DunklError {
    fn from(e: std::io::Error) -> Self {
        DunklError::Io(e.to_string())
    }
}

impl From<csv::Error> for DunklError {
    fn from(e: csv::Error) -> Self {
        DunklError::Io(e.to_string())
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(DunklError::InvalidParameter(msg.into()))
}
