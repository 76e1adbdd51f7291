use thiserror::Error;

/// Errors produced by the spectral and nonlinear solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("grid with {n} intervals is too coarse (need at least {min})")]
    GridTooCoarse { n: usize, min: usize },

    #[error("grid mismatch: {left} vs {right} intervals")]
    GridMismatch { left: usize, right: usize },

    #[error("expected {expected} values for the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("boundary angle {0} outside [0, pi)")]
    InvalidAngle(f64),

    #[error("unknown potential preset `{0}`")]
    UnknownPreset(String),

    #[error("malformed parameters for preset `{name}`: {reason}")]
    BadParams { name: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integrator failed at x = {x}: {reason}")]
    Integrator { x: f64, reason: String },

    #[error("no bracket for eigenvalue k = {k} within [{lo}, {hi}]")]
    NoBracket { k: usize, lo: f64, hi: f64 },

    #[error("no nonlinear solution with {nodes} nodes for lambda = {lambda}, delta = {delta}")]
    NoNonlinearSolution { lambda: f64, delta: i8, nodes: usize },

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for SpectraError {
    fn from(e: std::io::Error) -> Self {
        SpectraError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SpectraError>;
