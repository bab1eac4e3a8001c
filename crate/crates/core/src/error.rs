use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the estimation pipeline.
///
/// Variants are grouped by [`ErrorKind`] so callers (the CLI in particular)
/// can map them onto stable exit codes without matching every variant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("region {roi} is not contained in a {width}x{height} image")]
    RoiOutOfBounds {
        roi: String,
        width: usize,
        height: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("too few points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("ellipse fit failed: {0}")]
    FitFailure(String),
    #[error("robust fit failed: best model has {best} inliers, need {needed}")]
    RobustFitFailure { best: usize, needed: usize },
    #[error("scene is out of view: {0}")]
    OutOfView(String),
    #[error("detection failed: {0}")]
    Detection(String),
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification of [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Detection,
    Fit,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::RoiOutOfBounds { .. } => ErrorKind::Usage,
            Error::Detection(_) | Error::OutOfView(_) => ErrorKind::Detection,
            Error::DegenerateGeometry(_)
            | Error::TooFewPoints { .. }
            | Error::FitFailure(_)
            | Error::RobustFitFailure { .. }
            | Error::EmptyInput(_) => ErrorKind::Fit,
            Error::Parse { .. } | Error::Image(_) | Error::Json(_) | Error::Io { .. } => {
                ErrorKind::Io
            }
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
