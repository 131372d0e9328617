use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The fixed-step integrator lost more norm than allowed.
    #[error("integration accuracy: norm drift {drift:.3e} at t = {time} exceeds tolerance {tolerance:.1e}")]
    Accuracy { drift: f64, time: f64, tolerance: f64 },

    /// Some ensemble members failed; the written results are partial.
    #[error("{failed} of {total} realizations failed; results are partial")]
    PartialEnsemble { failed: usize, total: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Format { .. } => 1,
            Error::Accuracy { .. } | Error::PartialEnsemble { .. } | Error::Internal(_) => 2,
            Error::Io { .. } => 3,
        }
    }
}
