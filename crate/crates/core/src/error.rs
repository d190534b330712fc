use thiserror::Error;

use crate::hermitian::HermitianPD;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not Hermitian (relative deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sample {index} is the zero vector")]
    ZeroSample { index: usize },

    #[error("sample set does not span the space: {reason}")]
    DegenerateSampleSet { reason: String },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        /// Last iterate, so callers can inspect or persist it.
        partial: Option<Box<HermitianPD>>,
    },

    #[error("invalid radial score: {0}")]
    InvalidScore(String),

    #[error("all lattice residuals vanish at stage {stage}")]
    DegenerateSegment { stage: usize },

    #[error("inconsistent detector geometry: m = {m} exceeds tau = {tau}")]
    InvalidGeometry { tau: f64, m: f64 },

    #[error("{required} trials needed to resolve the false-alarm rate, only {available} available")]
    InsufficientTrials { required: u64, available: u64 },

    #[error("field mismatch: {0}")]
    FieldMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error("channel {index}: {source}")]
    Channel {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
