use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error(
        "control angle domain error: l*cos(theta_g - theta_f)/L = {ratio} outside [-1, 1] \
         (theta_g_hat = {theta_g}, theta_f_hat = {theta_f}, l = {offset}, L = {length})"
    )]
    ControlDomain {
        ratio: f64,
        theta_g: f64,
        theta_f: f64,
        offset: f64,
        length: f64,
    },

    #[error("contact broken: normal force {normal_force} N at or below threshold")]
    ContactBroken { normal_force: f64 },

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("profile parse error at line {line}, column {column}: {message}")]
    ProfileParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
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

    pub(crate) fn dims(expected: (usize, usize), actual: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            actual: format!("{}x{}", actual.0, actual.1),
        }
    }

    /// Replaces placeholder paths in format and I/O errors with `path`.
    pub(crate) fn at_path(self, path: &std::path::Path) -> Self {
        match self {
            Error::Format { reason, .. } => Error::Format {
                path: path.into(),
                reason,
            },
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        }
    }
}
