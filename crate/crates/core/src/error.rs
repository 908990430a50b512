use std::path::PathBuf;

/// Errors produced by the encoding, training and harness layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("index {index} out of range for {len} classes")]
    Index { index: usize, len: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
