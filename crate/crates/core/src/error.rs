use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Iteration cap hit; carries the best iterate seen so far.
    #[error("no convergence: {reason}")]
    NoConvergence {
        reason: String,
        best: Option<Box<SolveReport>>,
    },

    /// The iterate collapsed onto the zero field.
    #[error("degenerate iterate: {0}")]
    DegenerateIterate(String),

    #[error("malformed solution file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn no_convergence(reason: impl Into<String>) -> Self {
        Error::NoConvergence {
            reason: reason.into(),
            best: None,
        }
    }
}
