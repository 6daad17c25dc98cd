//! Continuous-signal preprocessing: dropout detection, anti-aliased
//! decimation, fixed-length segmentation and Welch power spectra.
//!
//! Decimation designs a Hamming-windowed sinc low-pass (unit DC gain) with
//! cutoff at `fir_cutoff_fraction` of the *post*-decimation Nyquist, applies
//! it forward and backward (zero phase, magnitude squared), then keeps every
//! k-th sample starting at index 0. A trailing remainder shorter than the
//! decimation factor is dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ieeg::Clip;

/// Knobs for the clip-to-segments preprocessing stage.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Downsampling factor; 2 or 4.
    pub decimation_factor: u32,
    /// Segment length in seconds of post-decimation signal.
    pub segment_seconds: u32,
    /// Anti-aliasing filter length (odd). 0 disables filtering.
    pub fir_taps: u32,
    /// Cutoff as a fraction of the post-decimation Nyquist, in (0, 1].
    pub fir_cutoff_fraction: f64,
    /// Clips whose dropout fraction is at or above this are excluded from
    /// training and evaluation.
    pub dropout_exclude_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            decimation_factor: 4,
            segment_seconds: 60,
            fir_taps: 129,
            fir_cutoff_fraction: 0.9,
            dropout_exclude_threshold: 0.99,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.decimation_factor, 2 | 4) {
            return Err(Error::InvalidConfig(format!(
                "decimation_factor must be 2 or 4, got {}",
                self.decimation_factor
            )));
        }
        if self.segment_seconds == 0 {
            return Err(Error::InvalidConfig("segment_seconds must be positive".into()));
        }
        if self.fir_taps != 0 && self.fir_taps % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "fir_taps must be odd (or 0 to disable), got {}",
                self.fir_taps
            )));
        }
        if !(self.fir_cutoff_fraction > 0.0 && self.fir_cutoff_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fir_cutoff_fraction must lie in (0, 1], got {}",
                self.fir_cutoff_fraction
            )));
        }
        if !(self.dropout_exclude_threshold > 0.0 && self.dropout_exclude_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dropout_exclude_threshold must lie in (0, 1], got {}",
                self.dropout_exclude_threshold
            )));
        }
        Ok(())
    }
}

// --- dropout ---

/// Result of scanning a clip for acquisition dropouts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropoutReport {
    /// Sample indices where *every* channel reads exactly 0.0.
    pub dropped_samples: Vec<usize>,
    /// `dropped_samples.len() / n_samples`.
    pub fraction: f64,
}

/// Flags samples where all channels are simultaneously exactly zero, the
/// signature of an acquisition dropout. Isolated zeros on a single channel
/// are legitimate crossings and do not count.
pub fn detect_dropout(clip: &Clip) -> DropoutReport {
    let n = clip.n_samples();
    let nc = clip.n_channels();
    let mut dropped = Vec::new();
    for i in 0..n {
        let all_zero = (0..nc).all(|c| clip.samples[c * n + i] == 0.0);
        if all_zero {
            dropped.push(i);
        }
    }
    let fraction = dropped.len() as f64 / n as f64;
    DropoutReport {
        dropped_samples: dropped,
        fraction,
    }
}

// --- FIR design and zero-phase filtering ---

/// Hamming-windowed sinc low-pass with `taps` coefficients (odd) and cutoff
/// in cycles/sample (0 < cutoff < 0.5), normalized to exactly unit DC gain.
pub fn design_lowpass(taps: usize, cutoff: f64) -> Result<Vec<f64>> {
    if taps < 3 || taps % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "FIR length must be odd and at least 3, got {taps}"
        )));
    }
    if !(cutoff > 0.0 && cutoff < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "cutoff must lie in (0, 0.5) cycles/sample, got {cutoff}"
        )));
    }
    let m = (taps - 1) as f64 / 2.0;
    let mut h = Vec::with_capacity(taps);
    for n in 0..taps {
        let x = n as f64 - m;
        let sinc = if x == 0.0 {
            2.0 * cutoff
        } else {
            (2.0 * std::f64::consts::PI * cutoff * x).sin() / (std::f64::consts::PI * x)
        };
        let w = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (taps - 1) as f64).cos();
        h.push(sinc * w);
    }
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v /= sum;
    }
    Ok(h)
}

/// Causal FIR pass: `y[n] = sum_k h[k] * x[n-k]` with x treated as zero
/// outside its bounds. Output has the same length as the input.
fn fir_pass(x: &[f64], h: &[f64], y: &mut Vec<f64>) {
    y.clear();
    y.resize(x.len(), 0.0);
    let k = h.len();
    for (n, out) in y.iter_mut().enumerate() {
        let lo = (n + 1).saturating_sub(k);
        let mut acc = 0.0;
        for (j, &xv) in x[lo..=n].iter().enumerate() {
            // x index lo+j pairs with tap n-(lo+j)
            acc += h[n - lo - j] * xv;
        }
        *out = acc;
    }
}

/// Zero-phase filtering: odd-reflection padding, forward pass, backward
/// pass. The effective frequency response is |H|^2 with no group delay.
pub fn filtfilt(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::EmptyInput("filtfilt input".into()));
    }
    let pad = (3 * h.len()).min(x.len().saturating_sub(1));
    let n = x.len();
    // Odd reflection keeps local trends continuous across the boundary.
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=pad {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }

    let mut fwd = Vec::new();
    fir_pass(&ext, h, &mut fwd);
    fwd.reverse();
    let mut bwd = Vec::new();
    fir_pass(&fwd, h, &mut bwd);
    bwd.reverse();

    // Each causal pass delays by (taps-1)/2; the reversal turns the pair
    // into a zero-phase whole, so the valid region sits exactly at [pad, pad+n).
    Ok(bwd[pad..pad + n].to_vec())
}

/// Anti-aliased decimation of every channel. Output sampling rate is
/// `rate / factor`; output length is `floor(n / factor)`, keeping samples
/// 0, k, 2k, … and dropping the tail remainder.
pub fn decimate(clip: &Clip, cfg: &PipelineConfig) -> Result<Clip> {
    cfg.validate()?;
    let k = cfg.decimation_factor as usize;
    let n = clip.n_samples();
    if n < k {
        return Err(Error::TooShort(format!(
            "clip {} has {n} samples, needs at least {k} to decimate by {k}",
            clip.clip_id
        )));
    }
    let out_len = n / k;
    let h = if cfg.fir_taps == 0 {
        None
    } else {
        // Cutoff relative to the *input* rate: fraction of new Nyquist.
        let cutoff = cfg.fir_cutoff_fraction * 0.5 / k as f64;
        Some(design_lowpass(cfg.fir_taps as usize, cutoff)?)
    };

    let mut out = Vec::with_capacity(clip.n_channels() * out_len);
    let mut chan_f64 = Vec::with_capacity(n);
    for c in 0..clip.n_channels() {
        chan_f64.clear();
        chan_f64.extend(clip.channel(c).iter().map(|&v| v as f64));
        let filtered = match &h {
            Some(taps) => filtfilt(&chan_f64, taps)?,
            None => chan_f64.clone(),
        };
        out.extend((0..out_len).map(|i| filtered[i * k] as f32));
    }

    let mut header = clip.header;
    header.sampling_rate = clip.header.sampling_rate / k as f64;
    header.n_samples = out_len as u64;
    let mut result = Clip::new(header, out, clip.clip_id.clone())?;
    result.patient_id = clip.patient_id.clone();
    result.sequence_index = clip.sequence_index;
    Ok(result)
}

// --- segmentation ---

/// A fixed-length multichannel window cut from a decimated clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub n_channels: usize,
    /// Samples per channel.
    pub len: usize,
    /// Channel-major, like the parent clip.
    pub samples: Vec<f32>,
    pub sampling_rate: f64,
    pub clip_id: String,
    pub patient_id: String,
    /// Position of this segment within its clip, starting at 0.
    pub segment_index: usize,
    pub label: crate::ieeg::Label,
}

impl Segment {
    pub fn channel(&self, c: usize) -> &[f32] {
        &self.samples[c * self.len..(c + 1) * self.len]
    }
}

/// Cuts a clip into consecutive non-overlapping segments of
/// `segment_seconds`. A partial tail is dropped; a clip shorter than one
/// segment is an error.
pub fn segment_clip(clip: &Clip, cfg: &PipelineConfig) -> Result<Vec<Segment>> {
    cfg.validate()?;
    let seg_len = (cfg.segment_seconds as f64 * clip.header.sampling_rate).round() as usize;
    if seg_len == 0 {
        return Err(Error::InvalidConfig("segment length rounds to zero samples".into()));
    }
    let n = clip.n_samples();
    if n < seg_len {
        return Err(Error::TooShort(format!(
            "clip {} has {n} samples at {} Hz, shorter than one {}-second segment",
            clip.clip_id, clip.header.sampling_rate, cfg.segment_seconds
        )));
    }
    let n_segments = n / seg_len;
    let mut segments = Vec::with_capacity(n_segments);
    for s in 0..n_segments {
        let mut samples = Vec::with_capacity(clip.n_channels() * seg_len);
        for c in 0..clip.n_channels() {
            let chan = clip.channel(c);
            samples.extend_from_slice(&chan[s * seg_len..(s + 1) * seg_len]);
        }
        segments.push(Segment {
            n_channels: clip.n_channels(),
            len: seg_len,
            samples,
            sampling_rate: clip.header.sampling_rate,
            clip_id: clip.clip_id.clone(),
            patient_id: clip.patient_id.clone(),
            segment_index: s,
            label: clip.header.label,
        });
    }
    Ok(segments)
}

// --- Welch power spectrum ---

/// One-sided power spectral density estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSpectrum {
    /// Bin centers in Hz, from 0 to the Nyquist frequency.
    pub freqs: Vec<f64>,
    /// Density in signal-units^2 per Hz; `sum(power) * df` approximates the
    /// signal variance.
    pub power: Vec<f64>,
}

impl PowerSpectrum {
    /// Integrated power over `[lo, hi]` Hz (rectangle rule over bins).
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        if self.freqs.len() < 2 {
            return 0.0;
        }
        let df = self.freqs[1] - self.freqs[0];
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| p * df)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        if self.freqs.len() < 2 {
            return 0.0;
        }
        let df = self.freqs[1] - self.freqs[0];
        self.power.iter().sum::<f64>() * df
    }
}

/// Welch PSD: Hann-windowed periodograms of mean-detrended, half-overlapping
/// blocks, averaged. Block length is 1024 or the largest power of two that
/// fits, whichever is smaller; inputs shorter than 16 samples are rejected.
pub fn power_spectrum(x: &[f64], sampling_rate: f64) -> Result<PowerSpectrum> {
    if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sampling_rate must be positive, got {sampling_rate}"
        )));
    }
    if x.len() < 16 {
        return Err(Error::TooShort(format!(
            "power_spectrum needs at least 16 samples, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("power_spectrum input".into()));
    }
    let nperseg = {
        let mut p = 16usize;
        while p * 2 <= x.len().min(1024) {
            p *= 2;
        }
        p
    };
    let hop = nperseg / 2;
    let window: Vec<f64> = (0..nperseg)
        .map(|n| {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / (nperseg - 1) as f64).cos())
        })
        .collect();
    let win_energy: f64 = window.iter().map(|w| w * w).sum();

    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(nperseg);
    let n_bins = nperseg / 2 + 1;
    let mut acc = vec![0.0f64; n_bins];
    let mut n_blocks = 0usize;
    let mut buf = vec![rustfft::num_complex::Complex::new(0.0, 0.0); nperseg];

    let mut start = 0usize;
    while start + nperseg <= x.len() {
        let block = &x[start..start + nperseg];
        let mean = block.iter().sum::<f64>() / nperseg as f64;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = rustfft::num_complex::Complex::new((block[i] - mean) * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            let mag2 = buf[k].norm_sqr();
            // One-sided density: interior bins carry both halves of the
            // spectrum, DC and Nyquist appear once.
            let scale = if k == 0 || k == nperseg - k { 1.0 } else { 2.0 };
            *a += scale * mag2 / (sampling_rate * win_energy);
        }
        n_blocks += 1;
        start += hop;
    }
    for a in &mut acc {
        *a /= n_blocks as f64;
    }
    let freqs = (0..n_bins)
        .map(|k| k as f64 * sampling_rate / nperseg as f64)
        .collect();
    Ok(PowerSpectrum { freqs, power: acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ieeg::{ClipHeader, Label};
    use rand::Rng;

    fn clip_from_channels(channels: &[Vec<f32>], rate: f64) -> Clip {
        let header = ClipHeader {
            n_channels: channels.len() as u32,
            n_samples: channels[0].len() as u64,
            sampling_rate: rate,
            label: Label::Interictal,
        };
        let samples: Vec<f32> = channels.concat();
        Clip::new(header, samples, "t").unwrap()
    }

    fn sine(freq: f64, rate: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate).sin()).collect()
    }

    /// DTFT of the taps, evaluated directly — the oracle for the designed
    /// filter's frequency response.
    fn dtft_mag(h: &[f64], f: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &hn) in h.iter().enumerate() {
            let phi = -2.0 * std::f64::consts::PI * f * n as f64;
            re += hn * phi.cos();
            im += hn * phi.sin();
        }
        (re * re + im * im).sqrt()
    }

    #[test]
    fn lowpass_design_gain_symmetry_and_response() {
        let h = design_lowpass(129, 0.1125).unwrap();
        assert_eq!(h.len(), 129);
        let dc: f64 = h.iter().sum();
        assert!((dc - 1.0).abs() < 1e-12, "DC gain {dc}");
        for i in 0..h.len() {
            assert!((h[i] - h[h.len() - 1 - i]).abs() < 1e-12, "asymmetric at {i}");
        }
        // Passband flat, stopband deep (Hamming: ~53 dB single pass).
        assert!((dtft_mag(&h, 0.05) - 1.0).abs() < 0.01);
        assert!(dtft_mag(&h, 0.175) < 0.005);
        assert!(dtft_mag(&h, 0.25) < 0.005);
    }

    #[test]
    fn lowpass_design_rejects_bad_parameters() {
        assert!(design_lowpass(128, 0.1).is_err());
        assert!(design_lowpass(1, 0.1).is_err());
        assert!(design_lowpass(129, 0.0).is_err());
        assert!(design_lowpass(129, 0.5).is_err());
    }

    #[test]
    fn filtfilt_is_zero_phase_in_passband() {
        let h = design_lowpass(129, 0.1125).unwrap();
        let x = sine(5.0, 400.0, 2000);
        let y = filtfilt(&x, &h).unwrap();
        // Same length, and no shift: compare pointwise against the input.
        assert_eq!(y.len(), x.len());
        let max_err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max_err < 0.01, "max pointwise error {max_err}");
    }

    #[test]
    fn filtfilt_preserves_constants_exactly() {
        let h = design_lowpass(33, 0.2).unwrap();
        let x = vec![3.25f64; 500];
        let y = filtfilt(&x, &h).unwrap();
        for v in y {
            assert!((v - 3.25).abs() < 3.25 * 1e-12);
        }
    }

    #[test]
    fn decimate_matches_ideal_resampling_of_passband_sine() {
        // 10 Hz sine at 400 Hz, decimated by 4 -> compare to the same sine
        // sampled directly at 100 Hz.
        let n = 4000;
        let x: Vec<f32> = sine(10.0, 400.0, n).iter().map(|&v| v as f32).collect();
        let clip = clip_from_channels(&[x], 400.0);
        let cfg = PipelineConfig::default();
        let out = decimate(&clip, &cfg).unwrap();
        assert_eq!(out.n_samples(), 1000);
        assert_eq!(out.header.sampling_rate, 100.0);

        let ideal = sine(10.0, 100.0, 1000);
        let got: Vec<f64> = out.channel(0).iter().map(|&v| v as f64).collect();
        let rms_err = (got.iter().zip(&ideal).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            / ideal.len() as f64)
            .sqrt();
        assert!(rms_err < 0.02, "rms error {rms_err} vs amplitude 1.0");

        // Amplitude preserved within 1%: estimate via sqrt(2) * RMS.
        let rms = (got.iter().map(|v| v * v).sum::<f64>() / got.len() as f64).sqrt();
        let amp = rms * std::f64::consts::SQRT_2;
        assert!((amp - 1.0).abs() < 0.01, "amplitude estimate {amp}");
    }

    #[test]
    fn decimate_rejects_aliasing_components() {
        // 70 Hz is above the new 50 Hz Nyquist; without the filter it would
        // fold to 30 Hz at full amplitude.
        let x: Vec<f32> = sine(70.0, 400.0, 4000).iter().map(|&v| v as f32).collect();
        let clip = clip_from_channels(&[x], 400.0);
        let out = decimate(&clip, &PipelineConfig::default()).unwrap();
        let rms = |s: &[f32]| {
            (s.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / s.len() as f64).sqrt()
        };
        // Away from the boundary transient the tone is gone entirely...
        let interior = rms(&out.channel(0)[..out.n_samples() - 150]);
        assert!(interior < 1e-4, "interior aliased rms {interior}");
        // ...and even counting the tail transient the suppression is strong
        // (the unfiltered alias would come through at rms ~0.71).
        let full = rms(out.channel(0));
        assert!(full < 0.02, "full aliased rms {full}");
    }

    #[test]
    fn decimate_keeps_constants_within_tolerance() {
        let clip = clip_from_channels(&[vec![3.25f32; 2001], vec![-7.5f32; 2001]], 400.0);
        let out = decimate(&clip, &PipelineConfig::default()).unwrap();
        assert_eq!(out.n_samples(), 500); // floor(2001/4), tail dropped
        for &v in out.channel(0) {
            assert!(((v - 3.25) / 3.25).abs() < 1e-6);
        }
        for &v in out.channel(1) {
            assert!(((v + 7.5) / 7.5).abs() < 1e-6);
        }
    }

    #[test]
    fn decimate_factor_two_path() {
        let x: Vec<f32> = sine(10.0, 400.0, 4000).iter().map(|&v| v as f32).collect();
        let clip = clip_from_channels(&[x], 400.0);
        let cfg = PipelineConfig { decimation_factor: 2, ..Default::default() };
        let out = decimate(&clip, &cfg).unwrap();
        assert_eq!(out.n_samples(), 2000);
        assert_eq!(out.header.sampling_rate, 200.0);
        let ideal = sine(10.0, 200.0, 2000);
        let rms_err = (out
            .channel(0)
            .iter()
            .zip(&ideal)
            .map(|(&a, b)| (a as f64 - b) * (a as f64 - b))
            .sum::<f64>()
            / 2000.0)
            .sqrt();
        assert!(rms_err < 0.02, "rms error {rms_err}");
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let ok = PipelineConfig::default();
        ok.validate().unwrap();
        assert!(PipelineConfig { decimation_factor: 3, ..ok.clone() }.validate().is_err());
        assert!(PipelineConfig { segment_seconds: 0, ..ok.clone() }.validate().is_err());
        assert!(PipelineConfig { fir_taps: 128, ..ok.clone() }.validate().is_err());
        assert!(PipelineConfig { fir_cutoff_fraction: 0.0, ..ok.clone() }.validate().is_err());
        assert!(PipelineConfig { fir_cutoff_fraction: 1.5, ..ok.clone() }.validate().is_err());
        assert!(PipelineConfig { dropout_exclude_threshold: 0.0, ..ok }.validate().is_err());
    }

    #[test]
    fn segmentation_of_ten_minute_clip_yields_ten_minutes() {
        // Post-decimation geometry of a standard clip: 60000 samples @ 100 Hz.
        let nc = 3;
        let n = 60_000;
        let channels: Vec<Vec<f32>> = (0..nc)
            .map(|c| (0..n).map(|i| (c * n + i) as f32).collect())
            .collect();
        let mut clip = clip_from_channels(&channels, 100.0);
        clip.patient_id = "p07".into();
        let segs = segment_clip(&clip, &PipelineConfig::default()).unwrap();
        assert_eq!(segs.len(), 10);
        for (s, seg) in segs.iter().enumerate() {
            assert_eq!(seg.len, 6000);
            assert_eq!(seg.n_channels, 3);
            assert_eq!(seg.segment_index, s);
            assert_eq!(seg.patient_id, "p07");
            // Channel-major content lines up with the parent clip.
            assert_eq!(seg.channel(1)[0], (n + s * 6000) as f32);
        }
    }

    #[test]
    fn segmentation_drops_partial_tail_and_rejects_short_clips() {
        let clip = clip_from_channels(&[(0..6500).map(|i| i as f32).collect()], 100.0);
        let segs = segment_clip(&clip, &PipelineConfig::default()).unwrap();
        assert_eq!(segs.len(), 1);

        let short = clip_from_channels(&[vec![0.0; 5999]], 100.0);
        assert!(matches!(
            segment_clip(&short, &PipelineConfig::default()),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn dropout_detector_requires_all_channels_zero() {
        let n = 100;
        let mut a = vec![1.0f32; n];
        let mut b = vec![-1.0f32; n];
        for i in 10..=20 {
            a[i] = 0.0;
            b[i] = 0.0;
        }
        a[30] = 0.0; // single-channel zero crossing: not a dropout
        let clip = clip_from_channels(&[a, b], 400.0);
        let report = detect_dropout(&clip);
        assert_eq!(report.dropped_samples, (10..=20).collect::<Vec<_>>());
        assert!((report.fraction - 11.0 / 100.0).abs() < 1e-12);
    }

    #[test]
    fn welch_peak_sits_at_the_tone_and_power_matches_variance() {
        let x = sine(12.5, 100.0, 4096);
        let ps = power_spectrum(&x, 100.0).unwrap();
        assert_eq!(ps.freqs[0], 0.0);
        assert_eq!(*ps.freqs.last().unwrap(), 50.0);
        assert!(ps.power.iter().all(|&p| p >= 0.0));

        let peak = ps
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let expected_bin = (12.5f64 / (100.0 / 1024.0)).round() as usize;
        assert_eq!(peak, expected_bin);

        // Unit sine has variance 0.5; Welch should conserve it approximately.
        let total = ps.total_power();
        assert!((total - 0.5).abs() < 0.05, "total power {total}");

        // Out-of-band energy is negligible.
        assert!(ps.band_power(20.0, 50.0) < 1e-6);
    }

    #[test]
    fn welch_conserves_noise_power() {
        let mut rng = crate::seeding::substream(11, "welch-noise");
        let x: Vec<f64> = (0..8192).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let var = {
            let m = x.iter().sum::<f64>() / x.len() as f64;
            x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
        };
        let ps = power_spectrum(&x, 256.0).unwrap();
        let total = ps.total_power();
        assert!((total / var - 1.0).abs() < 0.1, "total {total} vs variance {var}");
    }

    #[test]
    fn welch_rejects_degenerate_inputs() {
        assert!(matches!(power_spectrum(&[0.0; 8], 100.0), Err(Error::TooShort(_))));
        assert!(power_spectrum(&[f64::NAN; 64], 100.0).is_err());
        assert!(power_spectrum(&sine(1.0, 10.0, 64), 0.0).is_err());
    }
}
