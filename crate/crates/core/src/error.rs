use thiserror::Error;

/// Errors produced by stream ingestion, binning, divergence computation and
/// the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A stream record failed validation. Record numbers are 1-based over the
    /// data lines (the header does not count).
    #[error("record {record}: {reason}")]
    MalformedRecord { record: usize, reason: String },

    /// The stream header or supplied metadata is unusable.
    #[error("stream metadata: {0}")]
    Meta(String),

    /// An operation received an empty input it cannot work with.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A point or probability vector has the wrong arity.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Two binned estimates were built on different grids.
    #[error("grid mismatch: operands were built on different grids")]
    GridMismatch,

    /// A configuration value is out of range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A vector that should be a probability distribution is not one.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// No bin is occupied in both chunks of a pair, so no divergence exists.
    #[error("no overlapping occupied bins")]
    NoComparableBins,

    /// A non-finite value appeared where a finite one is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Chunks arrived out of order or with an unexpected shape.
    #[error("invalid chunk: {0}")]
    InvalidChunk(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
