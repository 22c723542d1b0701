use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid field of view: {0}")]
    InvalidFov(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite observation at index {0}")]
    NonFiniteObservation(usize),
    #[error("observation buffer is not warmed up")]
    BufferNotReady,
    #[error("singular linear system: {0}")]
    Singular(&'static str),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("field file: {0}")]
    FieldFormat(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("obstacle placement failed after {0} attempts")]
    PlacementFailed(usize),
    #[error("trace is empty")]
    EmptyTrace,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
