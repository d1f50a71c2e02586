use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its admissible range.
    #[error("invalid `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("index {index} out of range (need {needed} past samples, have {available})")]
    IndexOutOfRange {
        index: usize,
        needed: usize,
        available: usize,
    },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("nearest-neighbour query against an empty reference set")]
    EmptyReference,

    #[error("empty candidate list")]
    NoCandidates,

    #[error("all inputs already reached the target length")]
    GenerationComplete,

    #[error("multisine band [{lo}, {hi}] Hz contains no DFT bin")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("free-run simulation diverged at step {step} (|y| = {value:e})")]
    Divergence { step: usize, value: f64 },

    #[error("not enough training data: {samples} samples for {params} parameters")]
    InsufficientData { samples: usize, params: usize },

    #[error("malformed signal file: {0}")]
    Format(String),

    #[error("{failed} of {total} repetitions failed, exceeding the failure budget")]
    FailureBudget { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
