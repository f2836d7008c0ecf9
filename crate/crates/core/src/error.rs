use thiserror::Error;

/// Errors produced by the subdifferential toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unsupported variant pair for {op}: {lhs} and {rhs}")]
    UnsupportedVariants {
        op: &'static str,
        lhs: &'static str,
        rhs: &'static str,
    },

    #[error("invalid loss: {0}")]
    InvalidLoss(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("population oracle strategy unavailable: {0}")]
    OracleUnavailable(String),

    #[error("too many points for exhaustive labeling: {n} > {max}")]
    TooManyPoints { n: usize, max: usize },

    #[error("search budget must be positive")]
    ZeroBudget,

    #[error("no successful stationary terminals")]
    NoSuccessfulTerminals,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
