use alloc::string::String;

/// Errors raised by model validation, correspondence lookup, losses and fitting.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{field}: expected {expected} values, found {found}")]
    DimensionMismatch { field: &'static str, expected: usize, found: usize },
    #[error("{field}: {message}")]
    Invariant { field: &'static str, message: String },
    #[error("face {face}: degenerate UV triangle (area {area:e})")]
    DegenerateUv { face: usize, area: f64 },
    #[error("part {part} has no faces")]
    EmptyPart { part: u8 },
    #[error("keypoint {id} at ({x}, {y}) lies outside the {width}x{height} frame")]
    KeypointOutsideFrame { id: usize, x: f64, y: f64, width: u32, height: u32 },
    #[error("3D loss requires ground-truth joints or parameters")]
    Missing3d,
    #[error("dense loss requires at least one dense keypoint")]
    EmptyDense,
    #[error("annotation bundle carries no supervision source")]
    NoSupervision,
    #[error("non-finite {term} at iteration {iteration}")]
    NonFinite { term: &'static str, iteration: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invariant(field: &'static str, message: impl Into<String>) -> Error {
    Error::Invariant { field, message: message.into() }
}

pub(crate) fn check_len(field: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { field, expected, found })
    }
}
