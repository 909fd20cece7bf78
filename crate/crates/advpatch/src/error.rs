//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violated a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Malformed or unreadable input data (files, label lines, images).
    #[error("invalid input: {0}")]
    Input(String),

    /// Filesystem trouble, annotated with the offending path.
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Image decode/encode failure.
    #[error("image error at {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// Configuration file rejected.
    #[error("config error: {0}")]
    Config(String),

    /// A detector adapter failed mid-run.
    #[error("adapter '{name}' failed at step {step}: {message}")]
    Adapter {
        name: String,
        step: usize,
        message: String,
    },

    /// The training loss became non-finite.
    #[error("training diverged at step {step}: {message}")]
    Diverged { step: usize, message: String },
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
