use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{what} is singular (smallest singular value {sigma:.3e})")]
    Singular { what: String, sigma: f64 },
    #[error("projection stalled on a rank-deficient Jacobian (smallest singular value {sigma:.3e})")]
    RankDeficient { sigma: f64 },
    #[error("projection did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("value is not regular at parameter {parameter}: smallest singular value {sigma:.3e}")]
    NonRegular { parameter: String, sigma: f64 },
    #[error("map has no inverse")]
    MissingInverse,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors that stem from malformed input rather than a failed check.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::Dimension(_)
                | Error::Invalid(_)
                | Error::UnknownScenario(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
