use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the calibration pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("index out of bounds: {0}")]
    OutOfBounds(String),

    #[error("fitted phase slope k = {k} is not positive; fringe direction is reversed")]
    Orientation { k: f64 },

    #[error("mapping is not monotone: {0}")]
    NonMonotone(String),

    #[error("unsupported profile version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed document: {0}")]
    Format(String),

    #[error("image codec error for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("I/O error for {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
