//! Binary clip container and dataset manifest.
//!
//! # Clip container (`.ieeg`)
//!
//! Little-endian throughout. A 29-byte header:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `"IEGB"`                         |
//! | 4      | 4    | format version (`u32`, currently 1)    |
//! | 8      | 4    | `n_channels` (`u32`)                   |
//! | 12     | 8    | `n_samples` per channel (`u64`)        |
//! | 20     | 8    | `sampling_rate` in Hz (`f64`)          |
//! | 28     | 1    | label code (0 interictal, 1 preictal, 255 unlabeled) |
//!
//! followed by the sample payload: `n_channels * n_samples` IEEE-754 `f32`
//! values in channel-major order (all of channel 0, then channel 1, …).
//!
//! Identity metadata (`clip_id`, `patient_id`, `sequence_index`) is *not*
//! stored in the container. By convention the clip id is the file stem, and
//! patient / sequence assignment comes from the dataset manifest, so
//! [`read_clip`] fills `clip_id` from the path and leaves the rest empty.
//!
//! # Manifest (`manifest.json`)
//!
//! ```json
//! {"patients": [{"patient_id": "p01",
//!                "clips": [{"path": "p01/clip_0001.ieeg", "split": "train"}]}]}
//! ```
//!
//! Relative clip paths are resolved against the manifest's directory.
//! [`load_manifest`] checks the files exist, reads every header, rejects
//! duplicate clip ids within a patient, and returns per-patient /
//! per-split / per-label counts alongside the clip index.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"IEGB";
pub const FORMAT_VERSION: u32 = 1;
/// Bytes before the sample payload starts.
pub const HEADER_LEN: u64 = 29;

/// Clip class annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Interictal,
    Preictal,
    Unlabeled,
}

impl Label {
    pub fn code(self) -> u8 {
        match self {
            Label::Interictal => 0,
            Label::Preictal => 1,
            Label::Unlabeled => 255,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Label::Interictal),
            1 => Ok(Label::Preictal),
            255 => Ok(Label::Unlabeled),
            other => Err(Error::InvalidLabel(other)),
        }
    }

    /// Binary target used by the classifier (`None` for unlabeled clips).
    pub fn target(self) -> Option<bool> {
        match self {
            Label::Interictal => Some(false),
            Label::Preictal => Some(true),
            Label::Unlabeled => None,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Interictal => "interictal",
            Label::Preictal => "preictal",
            Label::Unlabeled => "unlabeled",
        })
    }
}

/// Fixed-size portion of the container.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipHeader {
    pub n_channels: u32,
    pub n_samples: u64,
    pub sampling_rate: f64,
    pub label: Label,
}

impl ClipHeader {
    pub fn payload_bytes(&self) -> u64 {
        self.n_channels as u64 * self.n_samples * 4
    }

    fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::InvalidHeader("n_channels must be positive".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidHeader("n_samples must be positive".into()));
        }
        if !(self.sampling_rate.is_finite() && self.sampling_rate > 0.0) {
            return Err(Error::InvalidHeader(format!(
                "sampling_rate must be positive and finite, got {}",
                self.sampling_rate
            )));
        }
        Ok(())
    }
}

/// One multichannel recording plus its identity metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub header: ClipHeader,
    /// Channel-major samples, `n_channels * n_samples` long.
    pub samples: Vec<f32>,
    /// By convention, the container file stem.
    pub clip_id: String,
    /// Empty when the clip was read outside a manifest.
    pub patient_id: String,
    /// Position within a recording hour, when known.
    pub sequence_index: Option<u32>,
}

impl Clip {
    pub fn new(header: ClipHeader, samples: Vec<f32>, clip_id: impl Into<String>) -> Result<Self> {
        header.validate()?;
        let expected = header.n_channels as usize * header.n_samples as usize;
        if samples.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "clip payload needs {expected} samples, got {}",
                samples.len()
            )));
        }
        Ok(Clip {
            header,
            samples,
            clip_id: clip_id.into(),
            patient_id: String::new(),
            sequence_index: None,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.header.n_channels as usize
    }

    pub fn n_samples(&self) -> usize {
        self.header.n_samples as usize
    }

    pub fn duration_seconds(&self) -> f64 {
        self.header.n_samples as f64 / self.header.sampling_rate
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.n_samples();
        &self.samples[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.n_samples();
        &mut self.samples[c * n..(c + 1) * n]
    }
}

fn read_exact_or(
    reader: &mut impl Read,
    buf: &mut [u8],
    path: &Path,
    expected: u64,
    found_so_far: u64,
) -> Result<()> {
    let mut filled = 0usize;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::Truncated {
                    path: path.to_path_buf(),
                    expected,
                    found: found_so_far + filled as u64,
                })
            }
            Ok(n) => filled += n,
            Err(ref e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io(path, e)),
        }
    }
    Ok(())
}

/// Serializes `clip` into the container format described in the module docs.
pub fn write_clip(clip: &Clip, path: &Path) -> Result<()> {
    clip.header.validate()?;
    let expected = clip.n_channels() * clip.n_samples();
    if clip.samples.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "clip payload needs {expected} samples, got {}",
            clip.samples.len()
        )));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    w.write_all(&MAGIC).map_err(io_err)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&clip.header.n_channels.to_le_bytes()).map_err(io_err)?;
    w.write_all(&clip.header.n_samples.to_le_bytes()).map_err(io_err)?;
    w.write_all(&clip.header.sampling_rate.to_le_bytes()).map_err(io_err)?;
    w.write_all(&[clip.header.label.code()]).map_err(io_err)?;
    // Payload in one pass; 4-byte chunks would be slow for 240k-sample clips.
    let mut buf = Vec::with_capacity(clip.samples.len() * 4);
    for &s in &clip.samples {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Reads and validates only the 29-byte header.
pub fn read_clip_header(path: &Path) -> Result<ClipHeader> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    read_header_from(&mut r, path)
}

fn read_header_from(r: &mut impl Read, path: &Path) -> Result<ClipHeader> {
    let mut head = [0u8; HEADER_LEN as usize];
    read_exact_or(r, &mut head, path, HEADER_LEN, 0)?;
    let magic: [u8; 4] = head[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let header = ClipHeader {
        n_channels: u32::from_le_bytes(head[8..12].try_into().unwrap()),
        n_samples: u64::from_le_bytes(head[12..20].try_into().unwrap()),
        sampling_rate: f64::from_le_bytes(head[20..28].try_into().unwrap()),
        label: Label::from_code(head[28])?,
    };
    header.validate()?;
    Ok(header)
}

/// Deserializes a clip. `clip_id` is taken from the file stem; patient and
/// sequence metadata stay empty (they live in the manifest).
pub fn read_clip(path: &Path) -> Result<Clip> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let header = read_header_from(&mut r, path)?;

    let payload = header.payload_bytes();
    let n_values = (payload / 4) as usize;
    let mut bytes = vec![0u8; payload as usize];
    read_exact_or(&mut r, &mut bytes, path, HEADER_LEN + payload, HEADER_LEN)?;
    // Trailing bytes after the declared payload are a malformed container.
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::InvalidHeader(format!(
                "{} has trailing bytes after the declared payload",
                path.display()
            )))
        }
        Err(e) => return Err(Error::io(path, e)),
    }

    let mut samples = Vec::with_capacity(n_values);
    for chunk in bytes.chunks_exact(4) {
        samples.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    let clip_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Clip::new(header, samples, clip_id)
}

// --- manifest ---

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// On-disk manifest document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub patients: Vec<ManifestPatient>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestPatient {
    pub patient_id: String,
    pub clips: Vec<ManifestClip>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestClip {
    pub path: String,
    pub split: Split,
}

/// One clip as indexed by [`load_manifest`]: resolved path, identity and the
/// header read from disk.
#[derive(Debug, Clone)]
pub struct ClipRef {
    pub path: PathBuf,
    pub clip_id: String,
    pub patient_id: String,
    pub split: Split,
    pub header: ClipHeader,
}

impl ClipRef {
    /// Reads the full clip and attaches manifest identity.
    pub fn load(&self) -> Result<Clip> {
        let mut clip = read_clip(&self.path)?;
        clip.clip_id = self.clip_id.clone();
        clip.patient_id = self.patient_id.clone();
        Ok(clip)
    }
}

/// Clip counts for one (patient, split) cell, broken down by label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LabelCounts {
    pub interictal: usize,
    pub preictal: usize,
    pub unlabeled: usize,
}

impl LabelCounts {
    fn bump(&mut self, label: Label) {
        match label {
            Label::Interictal => self.interictal += 1,
            Label::Preictal => self.preictal += 1,
            Label::Unlabeled => self.unlabeled += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.interictal + self.preictal + self.unlabeled
    }
}

/// A validated dataset: every referenced file exists and parses.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest_path: PathBuf,
    pub clips: Vec<ClipRef>,
    /// `(patient_id, split) -> counts`, ordered for stable iteration.
    pub counts: BTreeMap<(String, Split), LabelCounts>,
}

impl Dataset {
    pub fn patient_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.counts.keys().map(|(p, _)| p.clone()).collect();
        ids.dedup();
        ids
    }

    pub fn clips_in(&self, split: Split) -> impl Iterator<Item = &ClipRef> {
        self.clips.iter().filter(move |c| c.split == split)
    }
}

/// Parses `manifest.json`, resolves clip paths against the manifest's
/// directory, verifies every file exists with a readable header, and
/// rejects duplicate clip ids within a patient.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::MalformedManifest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut clips = Vec::new();
    let mut counts: BTreeMap<(String, Split), LabelCounts> = BTreeMap::new();
    for patient in &manifest.patients {
        if patient.patient_id.is_empty() {
            return Err(Error::MalformedManifest {
                path: path.to_path_buf(),
                reason: "empty patient_id".into(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for entry in &patient.clips {
            let clip_path = base.join(&entry.path);
            let clip_id = clip_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            if clip_id.is_empty() {
                return Err(Error::MalformedManifest {
                    path: path.to_path_buf(),
                    reason: format!("entry {:?} has no file name", entry.path),
                });
            }
            if !seen.insert(clip_id.clone()) {
                return Err(Error::DuplicateClipId {
                    patient_id: patient.patient_id.clone(),
                    clip_id,
                });
            }
            if !clip_path.is_file() {
                return Err(Error::MissingClipFile {
                    clip: clip_id,
                    path: clip_path,
                });
            }
            let header = read_clip_header(&clip_path)?;
            counts
                .entry((patient.patient_id.clone(), entry.split))
                .or_default()
                .bump(header.label);
            clips.push(ClipRef {
                path: clip_path,
                clip_id,
                patient_id: patient.patient_id.clone(),
                split: entry.split,
                header,
            });
        }
    }
    Ok(Dataset {
        manifest_path: path.to_path_buf(),
        clips,
        counts,
    })
}

/// Writes a manifest document as pretty-printed JSON.
pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serialization");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_clip() -> Clip {
        let header = ClipHeader {
            n_channels: 1,
            n_samples: 4,
            sampling_rate: 400.0,
            label: Label::Interictal,
        };
        Clip::new(header, vec![0.0; 4], "zero").unwrap()
    }

    /// Golden vector assembled by hand from the format table, not via the
    /// writer, so writer and reader are checked against the spec'd layout
    /// rather than against each other.
    #[test]
    fn golden_byte_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.ieeg");
        write_clip(&tiny_clip(), &path).unwrap();

        let bytes = fs::read(&path).unwrap();
        let mut expected = Vec::new();
        expected.extend_from_slice(b"IEGB");
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&4u64.to_le_bytes());
        expected.extend_from_slice(&400.0f64.to_le_bytes());
        expected.push(0u8);
        expected.extend_from_slice(&[0u8; 16]);
        assert_eq!(expected.len(), 45);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.ieeg");
        let header = ClipHeader {
            n_channels: 3,
            n_samples: 5,
            sampling_rate: 123.456,
            label: Label::Preictal,
        };
        // Exercise awkward f32 values: negative zero, subnormal, extremes.
        let samples: Vec<f32> = vec![
            -0.0,
            f32::MIN_POSITIVE / 2.0,
            f32::MAX,
            f32::MIN,
            1.0e-20,
            -3.25,
            7.5,
            0.1,
            -0.1,
            42.0,
            -42.0,
            1.5e10,
            -1.5e-10,
            2.0,
            3.0,
        ];
        let clip = Clip::new(header, samples.clone(), "rt").unwrap();
        write_clip(&clip, &path).unwrap();
        let back = read_clip(&path).unwrap();
        assert_eq!(back.header, header);
        assert_eq!(back.clip_id, "rt");
        assert_eq!(back.patient_id, "");
        assert_eq!(back.sequence_index, None);
        let a: Vec<u32> = samples.iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.samples.iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn payload_size_matches_recording_geometry() {
        // A standard 10-minute clip: 16 channels x 600 s x 400 Hz.
        let header = ClipHeader {
            n_channels: 16,
            n_samples: 240_000,
            sampling_rate: 400.0,
            label: Label::Unlabeled,
        };
        assert_eq!(header.payload_bytes(), 16 * 240_000 * 4);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ieeg");
        write_clip(&tiny_clip(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        match read_clip(&path) {
            Err(Error::BadMagic { found }) => assert_eq!(&found, b"XEGB"),
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unsupported_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v9.ieeg");
        write_clip(&tiny_clip(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&9u32.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_clip(&path), Err(Error::UnsupportedVersion(9))));
    }

    #[test]
    fn rejects_unknown_label_code() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lbl.ieeg");
        write_clip(&tiny_clip(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[28] = 7;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_clip(&path), Err(Error::InvalidLabel(7))));
    }

    #[test]
    fn truncation_reports_expected_and_found() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.ieeg");
        write_clip(&tiny_clip(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..40]).unwrap();
        match read_clip(&path) {
            Err(Error::Truncated { expected, found, .. }) => {
                assert_eq!(expected, 45);
                assert_eq!(found, 40);
            }
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn rejects_trailing_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("extra.ieeg");
        write_clip(&tiny_clip(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.push(0);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_clip(&path), Err(Error::InvalidHeader(_))));
    }

    #[test]
    fn rejects_degenerate_headers() {
        let bad = [
            ClipHeader { n_channels: 0, n_samples: 4, sampling_rate: 400.0, label: Label::Interictal },
            ClipHeader { n_channels: 1, n_samples: 0, sampling_rate: 400.0, label: Label::Interictal },
            ClipHeader { n_channels: 1, n_samples: 4, sampling_rate: 0.0, label: Label::Interictal },
            ClipHeader { n_channels: 1, n_samples: 4, sampling_rate: f64::NAN, label: Label::Interictal },
        ];
        for header in bad {
            assert!(matches!(
                Clip::new(header, vec![0.0; 4], "x"),
                Err(Error::InvalidHeader(_)) | Err(Error::ShapeMismatch(_))
            ));
        }
    }

    #[test]
    fn channel_accessor_is_channel_major() {
        let header = ClipHeader {
            n_channels: 2,
            n_samples: 3,
            sampling_rate: 10.0,
            label: Label::Unlabeled,
        };
        let clip = Clip::new(header, vec![1., 2., 3., 4., 5., 6.], "cm").unwrap();
        assert_eq!(clip.channel(0), &[1., 2., 3.]);
        assert_eq!(clip.channel(1), &[4., 5., 6.]);
    }

    fn write_labeled(dir: &Path, name: &str, label: Label) {
        let header = ClipHeader {
            n_channels: 2,
            n_samples: 8,
            sampling_rate: 100.0,
            label,
        };
        let clip = Clip::new(header, vec![0.5; 16], name).unwrap();
        write_clip(&clip, &dir.join(name)).unwrap();
    }

    #[test]
    fn manifest_roundtrip_counts_and_identity() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("p01")).unwrap();
        write_labeled(&dir.path().join("p01"), "a.ieeg", Label::Preictal);
        write_labeled(&dir.path().join("p01"), "b.ieeg", Label::Interictal);
        write_labeled(&dir.path().join("p01"), "c.ieeg", Label::Interictal);
        let manifest = Manifest {
            patients: vec![ManifestPatient {
                patient_id: "p01".into(),
                clips: vec![
                    ManifestClip { path: "p01/a.ieeg".into(), split: Split::Train },
                    ManifestClip { path: "p01/b.ieeg".into(), split: Split::Train },
                    ManifestClip { path: "p01/c.ieeg".into(), split: Split::Test },
                ],
            }],
        };
        let mpath = dir.path().join("manifest.json");
        save_manifest(&manifest, &mpath).unwrap();

        let ds = load_manifest(&mpath).unwrap();
        assert_eq!(ds.clips.len(), 3);
        let train = ds.counts[&("p01".to_string(), Split::Train)];
        assert_eq!((train.preictal, train.interictal), (1, 1));
        let test = ds.counts[&("p01".to_string(), Split::Test)];
        assert_eq!((test.preictal, test.interictal), (0, 1));
        // Identity flows from the manifest, not the container.
        let clip = ds.clips[0].load().unwrap();
        assert_eq!(clip.patient_id, "p01");
        assert_eq!(clip.clip_id, "a");
    }

    #[test]
    fn manifest_rejects_duplicates_missing_files_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        write_labeled(dir.path(), "a.ieeg", Label::Preictal);

        let dup = Manifest {
            patients: vec![ManifestPatient {
                patient_id: "p01".into(),
                clips: vec![
                    ManifestClip { path: "a.ieeg".into(), split: Split::Train },
                    ManifestClip { path: "./a.ieeg".into(), split: Split::Test },
                ],
            }],
        };
        let mpath = dir.path().join("manifest.json");
        save_manifest(&dup, &mpath).unwrap();
        assert!(matches!(load_manifest(&mpath), Err(Error::DuplicateClipId { .. })));

        let missing = Manifest {
            patients: vec![ManifestPatient {
                patient_id: "p01".into(),
                clips: vec![ManifestClip { path: "nope.ieeg".into(), split: Split::Train }],
            }],
        };
        save_manifest(&missing, &mpath).unwrap();
        assert!(matches!(load_manifest(&mpath), Err(Error::MissingClipFile { .. })));

        fs::write(&mpath, "{\"patients\": [{\"wrong\": 1}]}").unwrap();
        assert!(matches!(load_manifest(&mpath), Err(Error::MalformedManifest { .. })));
    }
}
