//! Subcommand implementations.

pub mod analyze;
pub mod infer;
pub mod preprocess;
pub mod synth;
pub mod train;
