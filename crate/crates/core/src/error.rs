use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate user_id {user_id:?} at line {line}")]
    DuplicateUser { user_id: String, line: usize },

    #[error(
        "explicit valid set would need {pairs} candidate pairs (limit {limit}); use the scalable mode"
    )]
    ValidSetTooLarge { pairs: u128, limit: u128 },

    #[error(
        "spurious sampler gave up after {attempts} consecutive rejections \
         ({accepted}/{requested} accepted, acceptance rate {acceptance_rate:.3e}); \
         the valid-count estimate is probably too high"
    )]
    SamplerExhausted {
        requested: usize,
        accepted: usize,
        attempts: u64,
        acceptance_rate: f64,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
