use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HoloError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HoloError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected {expected}, got {actual}")]
    GridMismatch { expected: String, actual: String },

    #[error("wavelength mismatch: field has {field} m, propagation expects {spec} m")]
    WavelengthMismatch { field: f64, spec: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("failed to read image {path}: {source}")]
    ImageRead {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("failed to write image {path}: {source}")]
    ImageWrite {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("target image {0} is entirely black")]
    BlackTarget(PathBuf),

    #[error("reconstructed field vanishes on the whole plane; gradient undefined")]
    DegenerateGradient,

    #[error("loss became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("calibration failed: correlation confidence {confidence:.3} below {threshold}")]
    CalibrationFailed { confidence: f64, threshold: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
