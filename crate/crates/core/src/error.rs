//! Error type shared across the simulation pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown shape '{name}': valid shapes are {valid}")]
    UnknownShape { name: String, valid: String },

    #[error("invalid path: {0}")]
    InvalidPath(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "grid spacing {spacing} mm too coarse for focal spot sigma {sigma} mm (limit sigma/2 = {limit} mm)"
    )]
    ResolutionTooCoarse { spacing: f64, sigma: f64, limit: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "smoothing kernel halfwidth {halfwidth} cells exceeds field size {rows}x{cols}; field too small to convolve"
    )]
    KernelWiderThanField { halfwidth: usize, rows: usize, cols: usize },

    #[error("sensor disc at pose ({x}, {y}) overhangs the field by {overhang_mm:.3} mm on the {side} side")]
    SensorOutsideField { x: f64, y: f64, overhang_mm: f64, side: &'static str },

    #[error("scan pose {index} out of field: {source}")]
    PoseOutOfField { index: usize, source: Box<Error> },

    #[error("non-finite target value at sample {index}")]
    NonFiniteTarget { index: usize },

    #[error("kernel matrix not positive definite (jitter escalated to {max_jitter:e} of signal variance)")]
    FactorizationFailed { max_jitter: f64 },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("stimulus not detected at the current pose")]
    StimulusLost,

    #[error("map is identically zero")]
    EmptyMap,

    #[error("maps have no overlapping cells")]
    NoOverlap,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
