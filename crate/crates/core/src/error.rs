use std::io;

use thiserror::Error;

/// Errors produced by the solver, the experiment drivers and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A scheme produced non-finite values, an iteration stalled, or a
    /// factorisation broke down.
    #[error("numerical failure: {message}")]
    NumericalFailure {
        message: String,
        /// Time-step index at which the failure was detected, when known.
        step: Option<usize>,
    },

    /// Bad command-line flag or config entry; `field` names the offender.
    #[error("usage error in `{field}`: {message}")]
    Usage { field: String, message: String },

    #[error("malformed result file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, step: Option<usize>) -> Self {
        Error::NumericalFailure {
            message: msg.into(),
            step,
        }
    }

    pub(crate) fn usage(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Usage {
            field: field.into(),
            message: msg.into(),
        }
    }

    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage { .. } | Error::InvalidArgument(_) => 2,
            Error::NumericalFailure { .. } => 3,
            Error::Format(_) | Error::Io(_) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
