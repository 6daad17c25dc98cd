//! Crate-wide error type.
//!
//! One enum covers the whole pipeline; variants are grouped roughly by the
//! module that raises them. Callers that need to distinguish validation
//! problems (bad input data or configuration) from environmental failures
//! (I/O) can use [`Error::is_validation`].

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // --- environment ---
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // --- container / manifest ---
    #[error("bad magic {found:?}, expected \"IEGB\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid label code {0}, expected 0, 1 or 255")]
    InvalidLabel(u8),
    #[error("truncated clip {path}: expected {expected} bytes after header, found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("invalid clip header: {0}")]
    InvalidHeader(String),
    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },
    #[error("manifest entry {clip} points at a missing file {path}")]
    MissingClipFile { clip: String, path: PathBuf },
    #[error("duplicate clip id {clip_id} under patient {patient_id}")]
    DuplicateClipId {
        patient_id: String,
        clip_id: String,
    },

    // --- numerics / shapes ---
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("channel {channel} has zero variance")]
    ZeroVariance { channel: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("signal too short: {0}")]
    TooShort(String),

    // --- configuration ---
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // --- training / evaluation ---
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("dataset has a single class: {0}")]
    SingleClass(String),

    // --- tensor cache / model files ---
    #[error("malformed tensor cache {path}: {reason}")]
    MalformedCache { path: PathBuf, reason: String },
    #[error("malformed model file {path}: {reason}")]
    MalformedModel { path: PathBuf, reason: String },
}

impl Error {
    /// Convenience constructor for I/O failures tagged with the offending path.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error indicates invalid input data or configuration
    /// rather than an environmental (I/O) failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
