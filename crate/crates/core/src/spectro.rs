//! STFT log-power images, dataset standardization and the on-disk tensor
//! cache that feeds the network.
//!
//! A segment channel of length `d` becomes an `n_freq x n_frames` image with
//! `n_freq = fft_len / 2 + 1` and `n_frames = floor((d - window_len) / hop) + 1`.
//! Pixel values are `10 * log10(max(P, log_floor))` decibels, where `P` is the
//! windowed periodogram power `|X|^2 / sum(w^2)` of the frame.
//!
//! # Cache layout
//!
//! `preprocess` writes one directory containing `index.json` (a
//! [`CacheIndex`]: configs, the train-split standardizer, per-segment entries
//! and excluded clips) plus one `.spt` blob per segment: three `u32` little-
//! endian dimensions `[n_channels, n_freq, n_frames]` followed by the raw
//! (unstandardized) image values as little-endian `f32`, channel-major.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ieeg::{Label, Split};
use crate::mat::Matrix;
use crate::signal::{PipelineConfig, Segment};

/// Frame taper applied before the FFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Hamming,
    Rect,
}

impl WindowKind {
    fn sample(self, n: usize, len: usize) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64;
        match self {
            WindowKind::Hann => 0.5 * (1.0 - phase.cos()),
            WindowKind::Hamming => 0.54 - 0.46 * phase.cos(),
            WindowKind::Rect => 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub window: WindowKind,
    /// Power floor applied before the log, keeping silent bins finite.
    pub log_floor: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_len: 256,
            hop: 224,
            fft_len: 256,
            window: WindowKind::Hann,
            log_floor: 1e-12,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::InvalidConfig(format!(
                "window_len must be at least 2, got {}",
                self.window_len
            )));
        }
        if self.hop == 0 {
            return Err(Error::InvalidConfig("hop must be positive".into()));
        }
        if self.fft_len < self.window_len {
            return Err(Error::InvalidConfig(format!(
                "fft_len {} must not be smaller than window_len {}",
                self.fft_len, self.window_len
            )));
        }
        if !(self.log_floor.is_finite() && self.log_floor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "log_floor must be positive, got {}",
                self.log_floor
            )));
        }
        Ok(())
    }

    pub fn n_freq(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Frames for a signal of length `d`; errors when `d < window_len`.
    pub fn n_frames(&self, d: usize) -> Result<usize> {
        if d < self.window_len {
            return Err(Error::TooShort(format!(
                "signal of {d} samples is shorter than the {}-sample window",
                self.window_len
            )));
        }
        Ok((d - self.window_len) / self.hop + 1)
    }
}

/// Log-power STFT image of one channel: `n_freq` rows by `n_frames` columns.
pub fn stft_image(signal: &[f32], cfg: &StftConfig) -> Result<Matrix> {
    cfg.validate()?;
    let n_frames = cfg.n_frames(signal.len())?;
    let n_freq = cfg.n_freq();
    let window: Vec<f64> = (0..cfg.window_len)
        .map(|n| cfg.window.sample(n, cfg.window_len))
        .collect();
    let win_energy: f64 = window.iter().map(|w| w * w).sum();

    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(cfg.fft_len);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_len];
    let mut image = Matrix::zeros(n_freq, n_frames);
    for t in 0..n_frames {
        let start = t * cfg.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            let x = if i < cfg.window_len {
                signal[start + i] as f64 * window[i]
            } else {
                0.0 // zero padding up to fft_len
            };
            *b = Complex::new(x, 0.0);
        }
        fft.process(&mut buf);
        for f in 0..n_freq {
            let p = buf[f].norm_sqr() / win_energy;
            image.set(f, t, 10.0 * p.max(cfg.log_floor).log10());
        }
    }
    Ok(image)
}

/// Stacked per-channel STFT images of one segment, plus its identity.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectroTensor {
    pub n_channels: usize,
    pub n_freq: usize,
    pub n_frames: usize,
    /// Channel-major `[n_channels][n_freq][n_frames]`, row-major within a
    /// channel.
    pub values: Vec<f64>,
    pub clip_id: String,
    pub patient_id: String,
    pub segment_index: usize,
    pub label: Label,
}

impl SpectroTensor {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_channels, self.n_freq, self.n_frames)
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let per = self.n_freq * self.n_frames;
        &self.values[c * per..(c + 1) * per]
    }
}

/// Transforms every channel of a segment into one stacked log-power tensor.
pub fn segment_to_tensor(seg: &Segment, cfg: &StftConfig) -> Result<SpectroTensor> {
    let n_frames = cfg.n_frames(seg.len)?;
    let n_freq = cfg.n_freq();
    let mut values = Vec::with_capacity(seg.n_channels * n_freq * n_frames);
    for c in 0..seg.n_channels {
        let image = stft_image(seg.channel(c), cfg)?;
        values.extend_from_slice(image.data());
    }
    Ok(SpectroTensor {
        n_channels: seg.n_channels,
        n_freq,
        n_frames,
        values,
        clip_id: seg.clip_id.clone(),
        patient_id: seg.patient_id.clone(),
        segment_index: seg.segment_index,
        label: seg.label,
    })
}

// --- standardization ---

/// Elementwise dataset standardizer: each tensor position gets its own mean
/// and standard deviation, estimated over the training tensors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Standardizer {
    pub n_channels: usize,
    pub n_freq: usize,
    pub n_frames: usize,
    pub mean: Vec<f64>,
    /// Population standard deviation; values below [`Standardizer::STD_FLOOR`]
    /// are floored at apply time.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub const STD_FLOOR: f64 = 1e-8;

    pub fn len(&self) -> usize {
        self.n_channels * self.n_freq * self.n_frames
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_shape(&self, shape: (usize, usize, usize)) -> Result<()> {
        if shape != (self.n_channels, self.n_freq, self.n_frames) {
            return Err(Error::ShapeMismatch(format!(
                "standardizer fit for {:?}, applied to {:?}",
                (self.n_channels, self.n_freq, self.n_frames),
                shape
            )));
        }
        Ok(())
    }

    /// Standardizes a raw value buffer in place.
    pub fn apply_slice(&self, shape: (usize, usize, usize), values: &mut [f64]) -> Result<()> {
        self.check_shape(shape)?;
        if values.len() != self.mean.len() {
            return Err(Error::ShapeMismatch("standardizer buffer length".into()));
        }
        for ((v, m), s) in values.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s.max(Self::STD_FLOOR);
        }
        Ok(())
    }

    pub fn apply(&self, tensor: &mut SpectroTensor) -> Result<()> {
        let shape = tensor.shape();
        self.apply_slice(shape, &mut tensor.values)
    }
}

/// Fits an elementwise standardizer in two passes. `load` fills the caller's
/// buffer with tensor `i`'s raw values; it runs twice per tensor, so cheap
/// re-reads (e.g. from the blob cache) are expected.
pub fn fit_standardizer<F>(
    shape: (usize, usize, usize),
    n_tensors: usize,
    mut load: F,
) -> Result<Standardizer>
where
    F: FnMut(usize, &mut [f64]) -> Result<()>,
{
    if n_tensors < 2 {
        return Err(Error::DegenerateData(format!(
            "standardizer needs at least 2 tensors, got {n_tensors}"
        )));
    }
    let (nc, nf, nt) = shape;
    let len = nc * nf * nt;
    if len == 0 {
        return Err(Error::EmptyInput("standardizer shape".into()));
    }
    let mut buf = vec![0.0f64; len];
    let mut mean = vec![0.0f64; len];
    for i in 0..n_tensors {
        load(i, &mut buf)?;
        for (m, v) in mean.iter_mut().zip(&buf) {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("tensor {i} during standardizer fit")));
            }
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n_tensors as f64;
    }
    let mut var = vec![0.0f64; len];
    for i in 0..n_tensors {
        load(i, &mut buf)?;
        for ((s, v), m) in var.iter_mut().zip(&buf).zip(&mean) {
            let e = v - m;
            *s += e * e;
        }
    }
    let std: Vec<f64> = var
        .iter()
        .map(|s| (s / n_tensors as f64).sqrt())
        .collect();
    Ok(Standardizer {
        n_channels: nc,
        n_freq: nf,
        n_frames: nt,
        mean,
        std,
    })
}

/// Fits directly from in-memory tensors (all must share one shape).
pub fn fit_standardizer_in_memory(tensors: &[SpectroTensor]) -> Result<Standardizer> {
    if tensors.is_empty() {
        return Err(Error::EmptyInput("standardizer fit".into()));
    }
    let shape = tensors[0].shape();
    for t in tensors {
        if t.shape() != shape {
            return Err(Error::ShapeMismatch("mixed tensor shapes in standardizer fit".into()));
        }
    }
    fit_standardizer(shape, tensors.len(), |i, buf| {
        buf.copy_from_slice(&tensors[i].values);
        Ok(())
    })
}

// --- tensor cache ---

/// One cached segment tensor.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CacheEntry {
    /// Blob file name, relative to the cache directory.
    pub file: String,
    pub clip_id: String,
    pub patient_id: String,
    pub split: Split,
    pub segment_index: usize,
    pub label: Label,
    pub n_channels: u32,
    pub n_freq: u32,
    pub n_frames: u32,
}

/// A clip dropped during preprocessing, and why.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExcludedClip {
    pub clip_id: String,
    pub patient_id: String,
    pub dropout_fraction: f64,
}

/// `index.json` at the root of a cache directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheIndex {
    pub pipeline: PipelineConfig,
    pub stft: StftConfig,
    /// Fit on the train split only.
    pub standardizer: Standardizer,
    pub entries: Vec<CacheEntry>,
    pub excluded: Vec<ExcludedClip>,
}

impl CacheIndex {
    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &CacheEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

pub const CACHE_INDEX_FILE: &str = "index.json";

pub fn save_cache_index(index: &CacheIndex, dir: &Path) -> Result<()> {
    let path = dir.join(CACHE_INDEX_FILE);
    let text = serde_json::to_string(index).expect("cache index serialization");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn load_cache_index(dir: &Path) -> Result<CacheIndex> {
    let path = dir.join(CACHE_INDEX_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: CacheIndex = serde_json::from_str(&text).map_err(|e| Error::MalformedCache {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    index.pipeline.validate()?;
    index.stft.validate()?;
    Ok(index)
}

/// Writes one tensor blob: dims as three little-endian `u32`, then values as
/// little-endian `f32`.
pub fn write_tensor_blob(tensor: &SpectroTensor, path: &Path) -> Result<()> {
    let mut bytes =
        Vec::with_capacity(12 + tensor.values.len() * 4);
    bytes.extend_from_slice(&(tensor.n_channels as u32).to_le_bytes());
    bytes.extend_from_slice(&(tensor.n_freq as u32).to_le_bytes());
    bytes.extend_from_slice(&(tensor.n_frames as u32).to_le_bytes());
    for &v in &tensor.values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Reads a tensor blob back as `(dims, values)`.
pub fn read_tensor_blob(path: &Path) -> Result<([u32; 3], Vec<f32>)> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 {
        return Err(Error::MalformedCache {
            path: path.to_path_buf(),
            reason: format!("blob has {} bytes, needs at least 12", bytes.len()),
        });
    }
    let dims = [
        u32::from_le_bytes(bytes[0..4].try_into().unwrap()),
        u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
        u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
    ];
    let expected = dims.iter().map(|&d| d as usize).product::<usize>();
    let payload = &bytes[12..];
    if payload.len() != expected * 4 {
        return Err(Error::MalformedCache {
            path: path.to_path_buf(),
            reason: format!(
                "blob payload is {} bytes, dims {:?} require {}",
                payload.len(),
                dims,
                expected * 4
            ),
        });
    }
    let mut values = Vec::with_capacity(expected);
    for chunk in payload.chunks_exact(4) {
        values.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok((dims, values))
}
