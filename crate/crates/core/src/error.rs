use std::path::PathBuf;

use thiserror::Error;

use crate::scene::PlaneLabel;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("topology error in plane {plane_id}: {message}")]
    Topology { plane_id: i64, message: String },

    #[error("no line label for plane pair ({0}, {1})")]
    UnmappedPair(PlaneLabel, PlaneLabel),

    #[error("rotation is not a proper orthonormal matrix (orthonormality error {ortho_err:.3e}, det {det})")]
    InvalidRotation { ortho_err: f64, det: f64 },

    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: u32,
        expected_h: u32,
        got_w: u32,
        got_h: u32,
    },

    #[error("point at infinity (last homogeneous coordinate {0:e})")]
    PointAtInfinity(f64),

    #[error("degenerate point set: {0}")]
    Degenerate(String),

    #[error("empty input")]
    EmptyInput,

    #[error("point behind camera (z = {0})")]
    BehindCamera(f64),

    #[error("degenerate polygon (area {0:e} mm^2)")]
    DegeneratePolygon(f64),

    #[error("missing or unpaired views: {0}")]
    MissingViews(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn topology(plane_id: i64, message: impl Into<String>) -> Self {
        Error::Topology {
            plane_id,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
