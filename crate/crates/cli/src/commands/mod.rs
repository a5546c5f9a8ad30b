pub mod analyze;
pub mod evaluate;
pub mod features;
pub mod ingest;
pub mod synth;
pub mod train;
