use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("class {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("empty calibration set")]
    EmptyCalibration,

    #[error("rejection threshold is not set")]
    ThresholdUnset,

    #[error("threshold selection needs at least 3 distinct values, got {distinct}")]
    TooFewDistinct { distinct: usize },

    #[error("objective is not finite at the starting point")]
    NonFiniteStart,

    #[error("input not rejected; nothing to explain")]
    NotRejected,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
