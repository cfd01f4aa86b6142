use thiserror::Error;

/// Errors raised anywhere in the localization stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("sample at t={got} precedes window tail t={tail}")]
    OutOfOrder { tail: f64, got: f64 },

    #[error("matrix is not a proper rotation: {0}")]
    NotRotation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("window not ready: {have} of {need} samples")]
    NotReady { have: usize, need: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
