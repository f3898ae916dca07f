use std::path::PathBuf;

use thiserror::Error;

/// Unified error type for the whole pipeline.
///
/// Variants map onto process exit codes so the binary can translate any
/// failure into a stable shell contract: 1 for usage and config problems,
/// 2 for missing inputs, 3 for numerical divergence, 4 for stale
/// checkpoints, 5 for unknown entities.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("index out of bounds: {what} {index} not below {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("required input not found: {0}")]
    MissingInput(PathBuf),

    #[error("non-finite loss at epoch {epoch}, batch {batch} (bpr={bpr}, cl={cl}, reg={reg})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        bpr: f64,
        cl: f64,
        reg: f64,
    },

    #[error("stale checkpoint: {field} is {found}, prepared data has {expected}")]
    StaleCheckpoint {
        field: &'static str,
        expected: String,
        found: String,
    },

    #[error("unknown user id {user} (dataset has {num_users} users)")]
    UnknownUser { user: usize, num_users: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for the CLI; 0 is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingInput(_) => 2,
            Error::NonFiniteLoss { .. } => 3,
            Error::StaleCheckpoint { .. } => 4,
            Error::UnknownUser { .. } => 5,
            _ => 1,
        }
    }
}
