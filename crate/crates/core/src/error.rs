use alloc::string::String;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid period: {0}")]
    InvalidPeriod(String),
    #[error("lag {lag} outside stored range (max lag {max_lag})")]
    LagOutOfRange { lag: i64, max_lag: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("matrix is singular (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("framing error: {0}")]
    Framing(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = core::result::Result<T, Error>;
