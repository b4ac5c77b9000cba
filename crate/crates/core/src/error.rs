use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid energy parameters: {0}")]
    InvalidParams(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid tour: {0}")]
    InvalidTour(String),

    #[error("cluster {cluster}: cluster-head index {index} out of range (cluster has {len} nodes)")]
    HeadOutOfRange {
        cluster: usize,
        index: usize,
        len: usize,
    },

    #[error("nodes {from} and {to} are not in adjacent layers")]
    NotAdjacent { from: usize, to: usize },

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in `{param}`")]
    NonFinite { param: String },

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
