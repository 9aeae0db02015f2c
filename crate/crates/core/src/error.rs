use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("parse error on line {line}: {msg}")]
    LineParse { line: usize, msg: String },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncation { expected: usize, found: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerics(String),

    #[error("lanes share no valid rows")]
    UndefinedOverlap,

    #[error("metric error: {0}")]
    Metric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
