use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("POI {poi_id} has conflicting {field}: first seen at line {first_line}, conflicting at line {line}")]
    ConflictingPoi {
        poi_id: String,
        field: &'static str,
        first_line: u64,
        line: u64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {what} {index} (size {size})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("unknown {what}: {key}")]
    Unknown { what: &'static str, key: String },

    #[error("spearman correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("training diverged at iteration {iteration}: objective is {value}")]
    Divergence { iteration: usize, value: f64 },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("checkpoint incompatible with dataset: {0}")]
    Incompatible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
