//! Deterministic synthetic iEEG generator and failure-mode injectors.
//!
//! Interictal clips are 1/f-shaped ("pink") noise per channel riding on a
//! fixed per-channel baseline offset. Preictal clips add a signature shared
//! across channels — band-limited 0–8 Hz oscillatory bursts plus sparse
//! biphasic spikes — scaled by a per-patient, per-channel gain so that
//! channels carry complementary amounts of evidence. Everything derives from
//! one master seed through labeled substreams, so generation is bitwise
//! reproducible clip by clip.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ieeg::{
    load_manifest, save_manifest, write_clip, Clip, ClipHeader, Dataset, Label, Manifest,
    ManifestClip, ManifestPatient, Split,
};
use crate::seeding::{randn, substream};

/// Marginal standard deviation of the background noise, microvolts.
const NOISE_SIGMA: f64 = 15.0;
/// Below this frequency the 1/f shaping flattens out (avoids a DC blow-up).
const PINK_KNEE_HZ: f64 = 0.5;
/// Per-channel baseline magnitude range, in units of `NOISE_SIGMA`.
const BASELINE_RANGE: (f64, f64) = (0.8, 1.2);
/// Oscillatory burst amplitude at strength 1.0, in units of `NOISE_SIGMA`.
const BURST_AMP: f64 = 2.0;
/// Spike peak amplitude at strength 1.0, in units of `NOISE_SIGMA`.
const SPIKE_AMP: f64 = 6.0;
/// Spike half-width parameter, seconds (energy stays below ~10 Hz).
const SPIKE_TAU: f64 = 0.025;

/// Clip counts for one split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub preictal: usize,
    pub interictal: usize,
}

/// Generator configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub train: SplitCounts,
    pub test: SplitCounts,
    pub n_channels: usize,
    pub sampling_rate: f64,
    pub clip_seconds: usize,
    /// Scales the preictal signature amplitude; 0 makes the classes
    /// statistically identical.
    pub signature_strength: f64,
    /// When set, overrides the train interictal count to
    /// `round(ratio * train.preictal)`.
    pub imbalance_ratio: Option<f64>,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 1,
            train: SplitCounts {
                preictal: 10,
                interictal: 60,
            },
            test: SplitCounts {
                preictal: 5,
                interictal: 20,
            },
            n_channels: 16,
            sampling_rate: 400.0,
            clip_seconds: 600,
            signature_strength: 1.0,
            imbalance_ratio: None,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::InvalidConfig("n_channels must be >= 1".into()));
        }
        if !(self.sampling_rate.is_finite() && self.sampling_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sampling_rate must be positive, got {}",
                self.sampling_rate
            )));
        }
        if self.clip_seconds == 0 {
            return Err(Error::InvalidConfig("clip_seconds must be >= 1".into()));
        }
        if !(self.signature_strength.is_finite() && self.signature_strength >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "signature_strength must be >= 0, got {}",
                self.signature_strength
            )));
        }
        if let Some(r) = self.imbalance_ratio {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "imbalance_ratio must be positive, got {r}"
                )));
            }
        }
        if self.n_samples() < 16 {
            return Err(Error::InvalidConfig(
                "clip_seconds * sampling_rate must be at least 16 samples".into(),
            ));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.clip_seconds as f64 * self.sampling_rate).round() as usize
    }

    /// Train interictal count after applying `imbalance_ratio`, if any.
    pub fn effective_train_interictal(&self) -> usize {
        match self.imbalance_ratio {
            Some(r) => (r * self.train.preictal as f64).round() as usize,
            None => self.train.interictal,
        }
    }
}

fn patient_id(index: usize) -> String {
    format!("p{:02}", index + 1)
}

fn clip_stem(patient: &str, split: Split, label: Label, idx: usize) -> String {
    let class = match label {
        Label::Preictal => "pre",
        Label::Interictal => "int",
        Label::Unlabeled => "unl",
    };
    format!("{patient}_{split}_{class}_{idx:04}")
}

/// Per-patient channel properties, drawn once from the patient substream.
struct PatientProfile {
    /// Multiplies the preictal signature per channel (complementarity).
    signature_gains: Vec<f64>,
    /// Fixed DC offset per channel, microvolts.
    baselines: Vec<f64>,
}

fn patient_profile(seed: u64, patient: &str, n_channels: usize) -> PatientProfile {
    let mut rng = substream(seed, &format!("synth.patient.{patient}"));
    let signature_gains = (0..n_channels).map(|_| rng.gen_range(0.6..1.4)).collect();
    let baselines = (0..n_channels)
        .map(|_| {
            let mag = rng.gen_range(BASELINE_RANGE.0..BASELINE_RANGE.1) * NOISE_SIGMA;
            if rng.gen::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    PatientProfile {
        signature_gains,
        baselines,
    }
}

/// 1/f-shaped Gaussian noise with exactly unit sample standard deviation,
/// synthesized in the frequency domain.
fn pink_noise(
    rng: &mut impl Rng,
    n: usize,
    sampling_rate: f64,
    fft: &dyn rustfft::Fft<f64>,
    buf: &mut [Complex<f64>],
) -> Vec<f64> {
    for b in buf.iter_mut() {
        *b = Complex::new(0.0, 0.0);
    }
    let half = n / 2;
    for k in 1..=half {
        let f = k as f64 * sampling_rate / n as f64;
        let amp = 1.0 / f.max(PINK_KNEE_HZ).sqrt();
        let re = randn(rng);
        let im = randn(rng);
        if k == n - k {
            // Nyquist bin of an even-length transform must stay real.
            buf[k] = Complex::new(amp * re, 0.0);
        } else {
            buf[k] = Complex::new(amp * re, amp * im);
            buf[n - k] = buf[k].conj();
        }
    }
    fft.process(buf);
    let mut x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let scale = 1.0 / var.sqrt().max(f64::MIN_POSITIVE);
    for v in &mut x {
        *v = (*v - mean) * scale;
    }
    x
}

/// Renders the preictal signature (bursts + spikes) at unit strength into a
/// freshly allocated buffer.
fn render_signature(rng: &mut impl Rng, n: usize, sampling_rate: f64) -> Vec<f64> {
    let mut sig = vec![0.0f64; n];
    let duration = n as f64 / sampling_rate;

    // Band-limited oscillatory bursts, 1-7 Hz, Hann envelopes, ~25% duty.
    let n_bursts = ((duration / 25.0).ceil() as usize).max(1) + rng.gen_range(0..3);
    for _ in 0..n_bursts {
        let center = rng.gen_range(0.0..duration);
        let width = rng.gen_range(4.0..8.0f64).min(duration);
        let freq = rng.gen_range(1.0..7.0);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let start = ((center - width / 2.0) * sampling_rate).floor().max(0.0) as usize;
        let stop = (((center + width / 2.0) * sampling_rate).ceil() as usize).min(n);
        for i in start..stop {
            let t = i as f64 / sampling_rate;
            let u = (t - (center - width / 2.0)) / width;
            if (0.0..=1.0).contains(&u) {
                let env = 0.5 * (1.0 - (std::f64::consts::TAU * u).cos());
                sig[i] += BURST_AMP * NOISE_SIGMA * env
                    * (std::f64::consts::TAU * freq * t + phase).sin();
            }
        }
    }

    // Sparse biphasic spikes: derivative-of-Gaussian, width ~6 tau.
    let n_spikes = ((duration / 12.0).ceil() as usize).max(1) + rng.gen_range(0..5);
    let half_width = (3.0 * SPIKE_TAU * sampling_rate).ceil() as isize;
    for _ in 0..n_spikes {
        let center = rng.gen_range(0.0..duration);
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let c_idx = (center * sampling_rate) as isize;
        for di in -half_width..=half_width {
            let i = c_idx + di;
            if i < 0 || i as usize >= n {
                continue;
            }
            let t = di as f64 / sampling_rate / SPIKE_TAU;
            // Peak of |t * exp(-t^2/2)| is e^{-1/2} at t = 1; normalize so
            // the waveform peaks at SPIKE_AMP * NOISE_SIGMA.
            let shape = -t * (-0.5 * t * t).exp() * std::f64::consts::E.sqrt();
            sig[i as usize] += sign * SPIKE_AMP * NOISE_SIGMA * shape;
        }
    }
    sig
}

/// Synthesizes one clip. `label` picks the generative branch; all draws come
/// from the clip's own substream so clips are independent and reorderable.
pub fn synth_clip(cfg: &SynthConfig, patient_index: usize, split: Split, label: Label, idx: usize) -> Result<Clip> {
    cfg.validate()?;
    let patient = patient_id(patient_index);
    let profile = patient_profile(cfg.rng_seed, &patient, cfg.n_channels);
    let stem = clip_stem(&patient, split, label, idx);
    let mut rng = substream(cfg.rng_seed, &format!("synth.clip.{stem}"));

    let n = cfg.n_samples();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];

    let signature = match label {
        Label::Preictal => render_signature(&mut rng, n, cfg.sampling_rate),
        _ => Vec::new(),
    };

    let mut samples = vec![0.0f32; cfg.n_channels * n];
    for c in 0..cfg.n_channels {
        let noise = pink_noise(&mut rng, n, cfg.sampling_rate, fft.as_ref(), &mut buf);
        let gain = profile.signature_gains[c] * cfg.signature_strength;
        let base = profile.baselines[c];
        let out = &mut samples[c * n..(c + 1) * n];
        if signature.is_empty() {
            for (o, nz) in out.iter_mut().zip(&noise) {
                *o = (base + NOISE_SIGMA * nz) as f32;
            }
        } else {
            for ((o, nz), sg) in out.iter_mut().zip(&noise).zip(&signature) {
                *o = (base + NOISE_SIGMA * nz + gain * sg) as f32;
            }
        }
    }

    let header = ClipHeader {
        n_channels: cfg.n_channels as u32,
        n_samples: n as u64,
        sampling_rate: cfg.sampling_rate,
        label,
    };
    let mut clip = Clip::new(header, samples, stem)?;
    clip.patient_id = patient;
    Ok(clip)
}

/// Generates the full dataset under `out_dir`: `clips/*.ieeg` plus
/// `manifest.json`. Returns the loaded dataset.
pub fn generate(cfg: &SynthConfig, out_dir: &Path) -> Result<Dataset> {
    cfg.validate()?;
    let clip_dir = out_dir.join("clips");
    std::fs::create_dir_all(&clip_dir).map_err(|e| Error::io(&clip_dir, e))?;

    let mut manifest = Manifest {
        patients: Vec::with_capacity(cfg.n_patients),
    };
    for p in 0..cfg.n_patients {
        let patient = patient_id(p);
        let mut clips = Vec::new();
        for split in [Split::Train, Split::Test] {
            let counts = match split {
                Split::Train => SplitCounts {
                    preictal: cfg.train.preictal,
                    interictal: cfg.effective_train_interictal(),
                },
                Split::Test => cfg.test,
            };
            for (label, count) in [
                (Label::Interictal, counts.interictal),
                (Label::Preictal, counts.preictal),
            ] {
                for idx in 0..count {
                    let clip = synth_clip(cfg, p, split, label, idx)?;
                    let rel = format!("clips/{}.ieeg", clip.clip_id);
                    write_clip(&clip, &out_dir.join(&rel))?;
                    clips.push(ManifestClip { path: rel, split });
                }
            }
        }
        manifest.patients.push(ManifestPatient {
            patient_id: patient,
            clips,
        });
    }
    let manifest_path = out_dir.join("manifest.json");
    save_manifest(&manifest, &manifest_path)?;
    load_manifest(&manifest_path)
}

// --- failure injectors ---

/// Zeroes every channel over the union of `[start, start+len)` windows
/// (clamped to the clip length).
pub fn inject_dropout(clip: &mut Clip, windows: &[(usize, usize)]) {
    let n = clip.n_samples();
    let nc = clip.n_channels();
    for &(start, len) in windows {
        let stop = start.saturating_add(len).min(n);
        for c in 0..nc {
            for v in &mut clip.samples[c * n + start.min(n)..c * n + stop] {
                *v = 0.0;
            }
        }
    }
}

/// Location of one injected outlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OutlierSite {
    pub channel: usize,
    pub sample: usize,
}

/// Adds `count` single-sample excursions of ±`magnitude_sigma` times the
/// channel's standard deviation at distinct random positions. Returns the
/// injection ledger for oracle comparisons.
pub fn inject_outliers(
    clip: &mut Clip,
    count: usize,
    magnitude_sigma: f64,
    seed: u64,
) -> Vec<OutlierSite> {
    let n = clip.n_samples();
    let nc = clip.n_channels();
    let stds: Vec<f64> = (0..nc)
        .map(|c| {
            let ch = &clip.samples[c * n..(c + 1) * n];
            let mean = ch.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            (ch.iter()
                .map(|&v| (v as f64 - mean) * (v as f64 - mean))
                .sum::<f64>()
                / n as f64)
                .sqrt()
        })
        .collect();

    let mut rng = substream(seed, "synth.outliers");
    let mut taken = HashSet::with_capacity(count);
    let mut ledger = Vec::with_capacity(count);
    while ledger.len() < count {
        let site = OutlierSite {
            channel: rng.gen_range(0..nc),
            sample: rng.gen_range(0..n),
        };
        if !taken.insert(site) {
            continue;
        }
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        clip.samples[site.channel * n + site.sample] +=
            (sign * magnitude_sigma * stds[site.channel]) as f32;
        ledger.push(site);
    }
    ledger
}

/// Affine transform of every sample: `x -> scale * x + offset`.
pub fn inject_shift(clip: &mut Clip, scale: f64, offset: f64) {
    for v in &mut clip.samples {
        *v = (scale * *v as f64 + offset) as f32;
    }
}
