use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid triplet query ({head}, {left}, {right}) for {n} objects")]
    InvalidQuery {
        head: usize,
        left: usize,
        right: usize,
        n: usize,
    },
    #[error("insufficient data: need at least {needed} objects, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("no ranking column for head {0}")]
    MissingRanking(usize),
    #[error("degenerate axis from endpoint {0}: its lens holds no other object")]
    DegenerateAxis(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("degenerate embedding: all embedded distances are zero")]
    DegenerateEmbedding,
    #[error("diagnostic unsupported for dimension {0} (only d <= 3)")]
    UnsupportedDiagnostic(usize),
    #[error("unknown dataset kind `{0}`")]
    UnknownKind(String),
    #[error("size mismatch: {what} has {got} objects, expected {expected}")]
    SizeMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("oracle failure: {0}")]
    Oracle(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
