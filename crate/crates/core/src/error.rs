use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("integration produced a non-finite value at t = {t}")]
    NonFinite { t: f64 },

    #[error("matrix is not symplectic: det W = {det}")]
    Symplecticity { det: f64 },

    #[error("operator is degenerate: eigenvalue {eigenvalue:e} within {tolerance:e} of zero")]
    Degenerate { eigenvalue: f64, tolerance: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("index consistency check failed: {what} (left = {left}, right = {right})")]
    Consistency {
        what: String,
        left: f64,
        right: f64,
    },

    #[error("chi table structure error: {0}")]
    TableStructure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
