use thiserror::Error;

use crate::metrics::SimilarityFit;

/// Pixel coordinate `(u, v)`: column, row.
pub type Pixel = (usize, usize);

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("evaluation domain is empty (no valid pixels)")]
    EmptyDomain,

    #[error("mesh is empty")]
    EmptyMesh,

    #[error("mesh has zero extent along the vertical axis")]
    ZeroHeight,

    #[error("|n_z| below {threshold} at {} pixel(s), first at {:?}", .pixels.len(), .pixels.first())]
    NearSilhouette { threshold: f64, pixels: Vec<Pixel> },

    #[error("back depth in front of front depth at {} pixel(s), first at {:?}", .pixels.len(), .pixels.first())]
    DepthOrdering { pixels: Vec<Pixel> },

    #[error("scene is not in front of the camera: {0}")]
    SceneBehindCamera(String),

    #[error("alignment did not converge (best error {:.4} mm)", .best.final_error)]
    NonConvergence { best: SimilarityFit },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
