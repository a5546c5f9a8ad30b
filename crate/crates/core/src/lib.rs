//! skipseg-core: turns raw music-streaming skip events into per-track Skip
//! Profiles, measures how specific and consistent those profiles are, and
//! drives a semi-supervised structural-segmentation pipeline on top of them:
//! profile de-trending, a skip-based boundary predictor, weak-label
//! generation, a Mel-spectrogram CNN, peak-picking, and windowed hit-rate
//! evaluation. A seeded synthetic generator provides ground-truthed corpora
//! so the whole pipeline can be exercised end to end without licensed data.

pub mod audio;
pub mod curve;
pub mod detrend;
pub mod error;
pub mod events;
pub mod exec;
pub mod neural;
pub mod profiles;
pub mod retrieval;
pub mod segeval;
pub mod signal;
pub mod skip_boundary;
pub mod synth;

pub use error::{Error, Result};
pub use exec::ExecMode;
