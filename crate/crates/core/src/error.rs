use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid annotations: {0}")]
    Annotation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unrecoverable joint {joint} ({name}): invalid in every frame")]
    UnrecoverableJoint { joint: usize, name: String },

    #[error("degenerate pose at frame {frame}: {reason}")]
    DegeneratePose { frame: usize, reason: &'static str },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("weight file: {0}")]
    Weights(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
