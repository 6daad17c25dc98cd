//! Intracranial EEG (iEEG) seizure-prediction pipeline.
//!
//! The crate follows the data path end to end:
//!
//! * [`ieeg`] — binary clip container and dataset manifest I/O
//! * [`signal`] — dropout detection, anti-aliased decimation, segmentation,
//!   Welch power spectra
//! * [`quant`] — exploratory statistics (five-number summaries, PCA,
//!   channel correlation, hierarchical sensor clustering, distribution
//!   shift, outlier scan)
//! * [`spectro`] — STFT log-power images, per-bin standardization and the
//!   on-disk tensor cache
//! * [`nn`] — a small dense/convolutional tensor engine with exact
//!   gradients, Adam, and finite-difference gradient checking
//! * [`model`] — the three-branch multi-scale CNN, training loop and
//!   clip-level aggregation
//! * [`eval`] — confusion counts, ROC/AUC and per-patient reports
//! * [`synth`] — deterministic synthetic iEEG generation and failure
//!   injectors used by tests and the demo pipeline

pub mod error;
pub mod eval;
pub mod ieeg;
pub mod mat;
pub mod model;
pub mod nn;
pub mod quant;
pub mod seeding;
pub mod signal;
pub mod spectro;
pub mod synth;

pub use error::{Error, Result};
