use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite entry in {context}")]
    NonFinite { context: &'static str },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{algorithm} did not converge after {iterations} sweeps on a {rows}x{cols} matrix")]
    NoConvergence {
        algorithm: &'static str,
        iterations: usize,
        rows: usize,
        cols: usize,
    },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("point lies outside the tubular neighborhood: {0}")]
    OutsideTube(String),

    #[error("point is not on the manifold (residual {residual:e})")]
    OffManifold { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("training diverged at epoch {epoch}: loss {loss:e}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("simulation produced a non-finite state at step {step}")]
    SimulationBlowup { step: usize },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
