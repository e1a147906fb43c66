use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The stream breaks the (timestamp, idx) order at the given position.
    #[error("stream is not sorted by (timestamp, idx) at position {position}")]
    Unsorted { position: usize },

    #[error("stream is not preprocessed: {0}")]
    NotClean(String),

    #[error("predictor failed on edge idx {idx}: {reason}")]
    Predictor { idx: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
