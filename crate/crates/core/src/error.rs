use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Rejected input or configuration.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Unitarity, trace, norm or positivity breach, or a failed decomposition.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no convergence: {0}")]
    NotConverged(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Io { .. } | Error::Parse { .. } => 2,
            Error::Numerical(_) => 3,
            Error::NotConverged(_) => 4,
        }
    }
}
