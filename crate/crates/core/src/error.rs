use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid sizing: {0}")]
    Sizing(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("operation does not accept a Dirac delta field: {0}")]
    DeltaUnsupported(&'static str),

    #[error("field is in the wrong domain: expected {expected}")]
    WrongDomain { expected: &'static str },

    #[error("invalid window spec: {0}")]
    InvalidSpec(String),

    #[error("window under-resolved: {0}")]
    Resolution(String),

    #[error("frequency out of range: {0}")]
    FrequencyRange(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate pairing |(a, nb)| = {0:e}")]
    DegeneratePairing(f64),

    #[error("partial phase-space slice: {0}")]
    PartialSlice(String),

    #[error("unsupported dimension {0} for this operation")]
    UnsupportedDimension(usize),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("non-finite state at t = {time}; {completed} of {requested} steps completed")]
    BlowUp {
        time: f64,
        completed: usize,
        requested: usize,
        /// Trajectory up to and including the last finite state.
        trajectory: Box<crate::schrodinger::Trajectory>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
