use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    /// Schema or invariant violation in an input file or value.
    #[error("invalid {what}: {reason}")]
    Invalid { what: String, reason: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("unknown object id {0:?}")]
    UnknownObject(String),
    #[error("duplicate object id {0:?}")]
    DuplicateId(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("agent already stopped")]
    Terminal,
}

impl Error {
    pub fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub fn dims(expected: impl std::fmt::Display, actual: impl std::fmt::Display) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
