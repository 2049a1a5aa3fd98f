use std::path::PathBuf;

/// Errors produced by the prevalence pipeline.
///
/// [`Error::Io`] is kept separate from the contract/validation variants so
/// front ends can map it to a distinct exit status.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate review id {0}")]
    DuplicateId(String),

    #[error("uninformative classifier: eta + theta = 1 (naive estimator undefined)")]
    UninformativeClassifier,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for filesystem failures, false for data and contract errors.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
