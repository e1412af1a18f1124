use thiserror::Error;

use crate::exprlang::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A metric or Jacobian is numerically singular at an evaluation point.
    #[error("singular {what}: |det| = {det:e}")]
    Singular { what: String, det: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    /// An operation's hypotheses do not hold for the given data.
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for numeric degeneracy (singular metric or Jacobian, domain errors).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::Eval(EvalError::Domain { .. }))
    }
}
