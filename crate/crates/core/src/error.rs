use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the embedding pipeline.
#[derive(Debug, Error)]
pub enum SgrError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("entity {0} has no incident weight in the auxiliary graph")]
    IsolatedEntity(String),

    #[error("{entities} entities exceeds dense size cap {cap}")]
    SizeCap { entities: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("svd did not converge ({rows}x{cols}, max |entry| {max_abs:e})")]
    SvdFailed {
        rows: usize,
        cols: usize,
        max_abs: f64,
    },

    #[error("malformed embedding file: {0}")]
    EmbeddingFormat(String),

    #[error("labels required for evaluation")]
    MissingLabels,
}

pub type Result<T> = std::result::Result<T, SgrError>;

impl SgrError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SgrError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable tag used by the CLI for machine-readable failure lines.
    pub fn kind(&self) -> &'static str {
        match self {
            SgrError::Io { .. } => "io",
            SgrError::Parse { .. } => "parse",
            SgrError::InvalidGraph(_) => "invalid_graph",
            SgrError::InvalidParam(_) => "invalid_param",
            SgrError::NonFinite(_) => "non_finite",
            SgrError::IsolatedEntity(_) => "isolated_entity",
            SgrError::SizeCap { .. } => "size_cap",
            SgrError::Shape(_) => "shape",
            SgrError::SvdFailed { .. } => "svd",
            SgrError::EmbeddingFormat(_) => "embedding_format",
            SgrError::MissingLabels => "missing_labels",
        }
    }
}
