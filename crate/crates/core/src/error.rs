use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or buffer lengths disagree.
    #[error("size error: {0}")]
    Size(String),

    /// Input outside the operation's domain (empty tensor, too few samples, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller broke an operation's precondition.
    #[error("contract error: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("checkpoint load error: {0}")]
    Load(String),

    #[error("replica divergence: {0}")]
    ReplicaDivergence(String),

    #[error("worker {rank} failed: {reason}")]
    WorkerFailed { rank: usize, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

macro_rules! size_err {
    ($($arg:tt)*) => { $crate::error::Error::Size(format!($($arg)*)) };
}
pub(crate) use size_err;
