use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmbError {
    /// A caller-supplied value is outside the accepted range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was invoked on a value that does not satisfy its precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty posterior bank")]
    EmptyBank,
}

pub type Result<T> = std::result::Result<T, GlmbError>;
