use thiserror::Error;

/// Errors produced by construction, stepping and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("sigma {0} outside the history window [-1, 0]")]
    SigmaRange(f64),

    #[error("cannot shift by {requested} samples past a window of {window}")]
    ShiftTooLong { requested: usize, window: usize },

    #[error("grid misalignment: {0}")]
    GridAlignment(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("fixed-point iteration did not converge within {max_iter} iterations (residual {residual:.3e})")]
    FixedPointDiverged { max_iter: usize, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
