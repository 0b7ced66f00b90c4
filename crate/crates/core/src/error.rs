use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vocabulary is empty after applying max_size/min_count filters")]
    EmptyVocabulary,

    #[error("count metadata mismatch: {0}")]
    MetadataMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("transition matrix is reducible (support is not strongly connected)")]
    Reducible,

    #[error("iteration did not converge: {0}")]
    NotConverged(String),

    #[error("graph has sink vertices with no out-edges: {0:?}")]
    SinkVertices(Vec<usize>),

    #[error("non-positive edge weight {weight} on edge ({from}, {to})")]
    NonPositiveWeight { from: usize, to: usize, weight: f64 },

    #[error("all emission weights vanished at latent state {0:?}")]
    EmissionUnderflow(Vec<f64>),

    #[error("empty row or column {0} in count matrix")]
    EmptyRowOrColumn(usize),

    #[error("vocabulary of {n} words exceeds the softmax cap of {cap}; use the regression loss")]
    SoftmaxTooLarge { n: usize, cap: usize },

    #[error("training diverged at epoch {epoch}, step {step}: loss is not finite")]
    Diverged { epoch: usize, step: usize },

    #[error("regression needs at least {needed} included pairs, found {found}")]
    TooFewPairs { needed: usize, found: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
