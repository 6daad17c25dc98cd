//! Serialization helpers shared by the subcommands.
//!
//! Reports are JSON (pretty-printed, trailing newline) or CSV. Field order
//! follows struct order and all floats print in shortest round-trip form,
//! so identical inputs produce byte-identical files; the only varying field
//! is the optional generation timestamp, suppressed by `--no-timestamp`.

use std::path::Path;

use serde::Serialize;

use ictus_core::{Error, Result};

/// Seconds since the Unix epoch, or `None` under `--no-timestamp`.
pub fn timestamp(no_timestamp: bool) -> Option<u64> {
    if no_timestamp {
        None
    } else {
        Some(
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        )
    }
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
    bytes.push(b'\n');
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))
}

/// Writes a CSV file from a header line and pre-joined rows.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// `create_dir_all` with the crate's error type.
pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Formats an `f64` for CSV: shortest round-trip form, empty when not
/// finite (CSV consumers choke on `NaN`).
pub fn csv_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}
