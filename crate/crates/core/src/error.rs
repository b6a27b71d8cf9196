use thiserror::Error;

/// Errors raised by the CHIP toolkit.
#[derive(Debug, Error)]
pub enum ChipError {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine produced an invalid value or failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed input data, with the 1-based line number where it was found.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, ChipError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(ChipError::Domain(msg.into()))
}
