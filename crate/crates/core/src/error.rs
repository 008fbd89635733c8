use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across dictionary construction, meshing, fitting and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in input")]
    NonFiniteInput,

    #[error("degenerate bounds: side {axis} has zero or negative length")]
    DegenerateBounds { axis: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("points are affinely dependent; no {dim}-dimensional simplex can be formed")]
    DegenerateInput { dim: usize },

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("mesh has {mesh_nodes} nodes but dataset has {data_points} points")]
    MeshDataMismatch { mesh_nodes: usize, data_points: usize },

    #[error("gram matrix is singular (condition estimate {condition:.3e})")]
    SingularGram { condition: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dictionary has no state block; state read-out is impossible")]
    NotStateInclusive,

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from the numerics rather than from inputs or IO.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularGram { .. } | Error::DegenerateInput { .. } | Error::TooFewPoints { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
