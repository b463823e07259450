//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// Camera construction or use with unusable calibration.
    #[error("invalid camera {id:?}: {reason}")]
    InvalidCamera { id: String, reason: String },

    /// A tensor or buffer did not have the expected shape.
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: String,
        expected: String,
        got: String,
    },

    /// A model parameter left its valid domain (e.g. near-zero quaternion).
    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),

    /// Warp mixture weights summed below the representable threshold.
    #[error("degenerate warp mixture: weight sum {sum:e} underflows at {at:?}")]
    DegenerateMixture { sum: f64, at: [f64; 3] },

    /// A gradient became NaN or infinite.
    #[error("non-finite gradient in tensor {tensor:?}")]
    NonFiniteGradient { tensor: String },

    /// The training loss became NaN or infinite.
    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: usize },

    /// Two evaluations of a supposedly pure objective disagreed.
    #[error("objective is not deterministic: {0} vs {1}")]
    NonDeterministic(f64, f64),

    /// Unknown name looked up in the parameter store.
    #[error("no parameter named {0:?}")]
    UnknownParam(String),

    /// Invalid run/model configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed checkpoint, rig, or image file.
    #[error("bad file {path:?}: {reason}")]
    BadFile { path: String, reason: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn bad_file(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::BadFile {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(what: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            what: what.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
