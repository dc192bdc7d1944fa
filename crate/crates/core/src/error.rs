use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("particles {i} and {j} collide (gap {gap:e})")]
    Collision { i: usize, j: usize, gap: f64 },

    #[error("unsupported beta {0}: expected 1, 2 or 4")]
    UnsupportedBeta(f64),

    #[error("point at distance {distance} lies outside the window of radius {radius}")]
    OutsideWindow { distance: f64, radius: f64 },

    #[error("label ordering violated at index {0}")]
    Ordering(usize),

    #[error("step at t = {time} could not be resolved without collision after {retries} retries")]
    SubstepExhausted { time: f64, retries: usize },

    #[error("log-density is not finite at the initial configuration after {0} attempts")]
    NonFiniteInit(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("missing per-step data: {0}")]
    MissingData(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
