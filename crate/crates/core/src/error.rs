use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GafsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GafsError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}, column {col}: cannot parse {token:?} as a number")]
    Parse {
        row: usize,
        col: usize,
        token: String,
    },

    #[error("row {row}, column {col}: non-finite value {token:?}")]
    NonFinite {
        row: usize,
        col: usize,
        token: String,
    },

    #[error("row {row} has {found} fields, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("dataset is empty")]
    Empty,

    #[error("sample {sample} has zero norm; cosine similarity is undefined")]
    ZeroNorm { sample: usize },

    #[error("{0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("objective is not finite at initialization (term: {term})")]
    NonFiniteObjective { term: &'static str },

    #[error("{0}")]
    Optimization(String),

    #[error("{0}")]
    Format(String),
}

impl GafsError {
    /// Stable, machine-parseable category name.
    pub fn category(&self) -> &'static str {
        match self {
            GafsError::Io { .. } => "io",
            GafsError::Parse { .. } => "parse",
            GafsError::NonFinite { .. } => "non-finite-input",
            GafsError::Ragged { .. } => "ragged-rows",
            GafsError::Empty => "empty-input",
            GafsError::ZeroNorm { .. } => "zero-norm-sample",
            GafsError::InvalidParameter(_) => "invalid-parameter",
            GafsError::ShapeMismatch(_) => "shape-mismatch",
            GafsError::NonFiniteObjective { .. } => "non-finite-objective",
            GafsError::Optimization(_) => "optimization",
            GafsError::Format(_) => "format",
        }
    }

    /// True for errors caused by bad input or configuration rather than a
    /// numerical or runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            GafsError::Io { .. }
                | GafsError::NonFiniteObjective { .. }
                | GafsError::Optimization(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GafsError::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        GafsError::ShapeMismatch(msg.into())
    }
}
