use thiserror::Error;

/// Errors produced by the skipseg core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed event record at line {line}: {reason}")]
    MalformedEvent { line: usize, reason: String },

    #[error("track {track}: conflicting durations {first}s vs {second}s")]
    DurationMismatch {
        track: String,
        first: f64,
        second: f64,
    },

    #[error("profiles are not mergeable: {reason}")]
    IncompatibleProfiles { reason: String },

    #[error("profile for track {track} has no streams")]
    EmptyProfile { track: String },

    #[error("track {track} is too short ({duration_s}s) for a profile fragment")]
    TrackTooShort { track: String, duration_s: f64 },

    #[error("track {track}: fragment slice is all zero")]
    AllZeroFragment { track: String },

    #[error("bin width {bin_width_s}s does not evenly divide the fragment window")]
    BinWidthIncompatible { bin_width_s: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least 2 usable days, found {usable}")]
    NotEnoughDays { usable: usize },

    #[error("relevance list contains no relevant items")]
    NoRelevantItems,

    #[error("invalid thresholds: tau_lo {lo} must be below tau_hi {hi}, both in [0, 1]")]
    ThresholdOrder { lo: f64, hi: f64 },

    #[error("training set contains a single class")]
    SingleClass,

    #[error("architecture has {count} parameters, budget is {budget}")]
    ParamBudget { count: usize, budget: usize },

    #[error("invalid architecture: {reason}")]
    InvalidArchitecture { reason: String },

    #[error("shape mismatch at layer {layer} ({kind}): {reason}")]
    ShapeMismatch {
        layer: usize,
        kind: String,
        reason: String,
    },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    NonFiniteLoss { epoch: usize },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error("reference boundary set is empty")]
    EmptyReference,

    #[error("no residual peak found after any boundary")]
    NoResidualPeak,

    #[error("audio clip is too short: {reason}")]
    AudioTooShort { reason: String },

    #[error("boundary times must be strictly increasing and positive")]
    InvalidBoundaries,

    #[error("infeasible generator ranges: {reason}")]
    InfeasibleRange { reason: String },

    #[error("unsupported audio format: {reason}")]
    UnsupportedAudio { reason: String },

    #[error("bad file format: {reason}")]
    BadFormat { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
