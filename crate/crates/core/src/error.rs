use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or image extents do not fit the operation.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Invalid option, hyperparameter or dataset layout.
    #[error("configuration error: {0}")]
    Config(String),

    /// NaN or infinity where finite values are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An operation was called out of order (e.g. backward without a cache).
    #[error("state error: {0}")]
    State(String),

    /// Invalid caller-supplied value such as a class index.
    #[error("input error: {0}")]
    Input(String),

    /// Malformed binary or image file.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Decodable container whose pixel format is not 8-bit grayscale.
    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }
}
