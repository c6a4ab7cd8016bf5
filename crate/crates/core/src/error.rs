use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or solver parameter is outside its valid domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid dimensions {width}x{height}: {reason}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        reason: String,
    },

    #[error("polynomial fit is rank deficient: {0}")]
    RankDeficient(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    /// The TV curve carries no information (e.g. constant input image).
    #[error("uninformative image: {0}")]
    UninformativeImage(String),

    #[error("curve sample at cn2 = {cn2:e} failed: {source}")]
    SampleFailed {
        cn2: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: parse error at byte offset {offset}: {reason}")]
    Parse {
        path: PathBuf,
        offset: usize,
        reason: String,
    },

    #[error("{path}: unsupported image format: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the filesystem or file contents rather than
    /// by parameters.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::UnsupportedFormat { .. }
                | Error::Codec { .. }
        )
    }
}
