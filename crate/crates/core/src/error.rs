use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("edge list is not symmetric: ({0}, {1}) present but ({1}, {0}) missing")]
    AsymmetricEdge(usize, usize),

    #[error("label {label} of node {node} is outside [0, {n_classes})")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        n_classes: usize,
    },

    #[error("node {0} has no neighbours and no self-loop; row normalization would divide by zero")]
    IsolatedNode(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),

    #[error("node {0} is both anchored and a candidate")]
    AnchorCandidateOverlap(usize),

    #[error("node {0} is not in the candidate pool")]
    UnknownCandidate(usize),

    #[error("adjacency row {row} sums to {sum}, expected a row-stochastic matrix")]
    NotRowStochastic { row: usize, sum: f64 },

    #[error("exhaustive enumeration over {0} candidates exceeds the guard of {1}")]
    EnumerationGuard(usize, usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no unlabeled nodes left to pseudo-label")]
    PoolExhausted,

    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, detail: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            detail: detail.to_string(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
