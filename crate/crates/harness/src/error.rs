use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// A configuration value is missing, malformed or out of range.
    #[error("config error: {0}")]
    Config(String),
    /// An artifact that should exist is absent or unreadable.
    #[error("{}: {reason}", path.display())]
    Artifact { path: PathBuf, reason: String },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] grokbench::Error),
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn artifact(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        HarnessError::Artifact {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(grokbench::Error::InvalidParameter { .. }) => 2,
            HarnessError::Artifact { .. } => 3,
            HarnessError::Io { .. } | HarnessError::Core(_) => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
