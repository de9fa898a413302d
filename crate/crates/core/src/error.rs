use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("matrix is singular or rank deficient: {0}")]
    Singular(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("expected a {expected} channel set, got {found}")]
    FieldMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
