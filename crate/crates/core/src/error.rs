use thiserror::Error;

use crate::rkg::{EdgeKind, NodeKind};

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid chunking window: max_tokens ({max_tokens}) must exceed overlap ({overlap})")]
    InvalidWindow { max_tokens: usize, overlap: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("edge `{edge_id}` of kind {kind:?} cannot connect {source_kind:?} -> {target_kind:?}")]
    SchemaViolation {
        edge_id: String,
        kind: EdgeKind,
        source_kind: NodeKind,
        target_kind: NodeKind,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("negative loss component: {0}")]
    NegativeLoss(f64),

    #[error("invalid citation pattern `{pattern}`: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("severity is undefined for compliant findings")]
    CompliantSeverity,

    #[error("infeasible fixture request: {0}")]
    Infeasible(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
