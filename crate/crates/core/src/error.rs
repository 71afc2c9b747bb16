use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("ray direction is not unit length (|dir| = {0})")]
    InvalidDirection(f64),

    #[error("voxel grid does not cover the mesh bounding box")]
    GridTooSmall,

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("hand model mismatch: {0}")]
    ModelMismatch(String),

    #[error("invalid surface point: {0}")]
    InvalidSurfacePoint(String),

    #[error("occlusion epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("weight container mismatch: {0}")]
    WeightMismatch(String),

    #[error("fit initialization gives a non-finite loss")]
    InvalidInitialization,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("fields are anchored to different object point sets")]
    PointSetMismatch,

    #[error("{0}")]
    InvalidArgument(String),

    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },

    /// An error raised inside one stage of a multi-stage command.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Short stable identifier, used as the machine-readable prefix of CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMesh(_) => "invalid-mesh",
            Error::InvalidDirection(_) => "invalid-direction",
            Error::GridTooSmall => "grid-too-small",
            Error::DegenerateConfiguration(_) => "degenerate-configuration",
            Error::ModelMismatch(_) => "model-mismatch",
            Error::InvalidSurfacePoint(_) => "invalid-surface-point",
            Error::InvalidEpsilon(_) => "invalid-epsilon",
            Error::WeightMismatch(_) => "weight-mismatch",
            Error::InvalidInitialization => "invalid-initialization",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::PointSetMismatch => "point-set-mismatch",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Stage { source, .. } => source.kind(),
        }
    }
}
