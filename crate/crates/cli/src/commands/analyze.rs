//! `ictus analyze` — per-patient exploratory statistics over raw clips.
//!
//! One JSON report per patient: per-clip dropout and outlier scans,
//! per-channel five-number summaries for each split, the train-clip-averaged
//! channel correlation matrix with its sensor dendrogram, PCA explained
//! variance, and per-channel train-vs-test distribution-shift statistics.
//!
//! Summaries, PCA and shift statistics run on deterministically strided
//! subsamples capped by `analysis.max_samples_per_channel`; dropout and
//! outlier scans always see every sample.

use serde::Serialize;

use ictus_core::ieeg::{self, ClipRef, Label, Split};
use ictus_core::mat::Matrix;
use ictus_core::quant::{self, Dendrogram, FiveNumberSummary, OutlierHit};
use ictus_core::{signal, Error, Result};

use crate::config::{required_path, AnalysisConfig, RunConfig};
use crate::report::{ensure_dir, timestamp, write_json};
use crate::AnalyzeArgs;

#[derive(Serialize)]
struct ClipReport {
    clip_id: String,
    split: Split,
    label: Label,
    n_samples: usize,
    n_dropped_samples: usize,
    dropout_fraction: f64,
    outlier_count: usize,
    /// First sites in scan order, capped by `analysis.max_outliers_reported`.
    outliers: Vec<OutlierHit>,
}

#[derive(Serialize)]
struct SplitSummaries {
    train: Vec<FiveNumberSummary>,
    test: Vec<FiveNumberSummary>,
}

#[derive(Serialize)]
struct CorrelationReport {
    n_train_clips: usize,
    /// Elementwise mean of per-clip channel correlation matrices.
    matrix: Vec<Vec<f64>>,
    mean_abs_offdiag: f64,
}

#[derive(Serialize)]
struct PcaReport {
    /// Per-clip explained ratios averaged over train clips.
    explained_ratio: Vec<f64>,
    cumulative_ratio: Vec<f64>,
    variance_threshold: f64,
    components_for_threshold: usize,
}

#[derive(Serialize)]
struct ShiftReport {
    /// KS statistic per channel, train pool vs test pool.
    per_channel: Vec<f64>,
    threshold: f64,
    flagged_channels: Vec<usize>,
}

#[derive(Serialize)]
struct AnalyzeDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at_unix: Option<u64>,
    patient_id: String,
    n_channels: usize,
    sampling_rate: f64,
    clips: Vec<ClipReport>,
    channel_summaries: SplitSummaries,
    correlation: CorrelationReport,
    dendrogram: Dendrogram,
    pca: PcaReport,
    distribution_shift: ShiftReport,
}

pub fn run(args: &AnalyzeArgs) -> Result<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let manifest = required_path(&cfg.paths.data, "data")?;
    let dataset = ieeg::load_manifest(manifest)?;
    ensure_dir(&args.out)?;
    let stamp = timestamp(args.no_timestamp);

    for patient in dataset.patient_ids() {
        let doc = analyze_patient(&dataset, &patient, &cfg.analysis, stamp)?;
        let path = args.out.join(format!("{patient}.json"));
        write_json(&path, &doc)?;
        println!("analysis: {}", path.display());
    }
    Ok(())
}

/// Split-wide sample pools, one vector per channel, built by striding each
/// clip with a common phase so the cap applies across the whole split.
struct ChannelPools {
    stride: usize,
    consumed: usize,
    channels: Vec<Vec<f64>>,
}

impl ChannelPools {
    fn new(total_samples: usize, cap: usize, n_channels: usize) -> Self {
        ChannelPools {
            stride: (total_samples.div_ceil(cap)).max(1),
            consumed: 0,
            channels: vec![Vec::new(); n_channels],
        }
    }

    fn absorb(&mut self, clip: &ieeg::Clip) {
        let n = clip.n_samples();
        let first = (self.stride - self.consumed % self.stride) % self.stride;
        for (ch, pool) in self.channels.iter_mut().enumerate() {
            let xs = clip.channel(ch);
            let mut i = first;
            while i < n {
                pool.push(xs[i] as f64);
                i += self.stride;
            }
        }
        self.consumed += n;
    }
}

fn analyze_patient(
    dataset: &ieeg::Dataset,
    patient: &str,
    acfg: &AnalysisConfig,
    stamp: Option<u64>,
) -> Result<AnalyzeDocument> {
    let clips: Vec<&ClipRef> = dataset
        .clips
        .iter()
        .filter(|c| c.patient_id == patient)
        .collect();
    let n_channels = clips[0].header.n_channels as usize;
    let sampling_rate = clips[0].header.sampling_rate;
    for c in &clips {
        if c.header.n_channels as usize != n_channels {
            return Err(Error::ShapeMismatch(format!(
                "clip {} has {} channels but patient {patient} starts with {n_channels}",
                c.clip_id, c.header.n_channels
            )));
        }
    }
    for split in [Split::Train, Split::Test] {
        if !clips.iter().any(|c| c.split == split) {
            return Err(Error::EmptyInput(format!(
                "patient {patient} has no {split} clips; analysis compares both splits"
            )));
        }
    }

    let total_of = |split: Split| {
        clips
            .iter()
            .filter(|c| c.split == split)
            .map(|c| c.header.n_samples as usize)
            .sum::<usize>()
    };
    let mut train_pool = ChannelPools::new(
        total_of(Split::Train),
        acfg.max_samples_per_channel,
        n_channels,
    );
    let mut test_pool = ChannelPools::new(
        total_of(Split::Test),
        acfg.max_samples_per_channel,
        n_channels,
    );

    let mut clip_reports = Vec::with_capacity(clips.len());
    let mut corr_sum = Matrix::zeros(n_channels, n_channels);
    let mut ratio_sum = vec![0.0f64; n_channels];
    let mut n_train = 0usize;

    for clip_ref in &clips {
        let clip = clip_ref.load()?;
        let dropout = signal::detect_dropout(&clip);

        let n = clip.n_samples();
        let mut data = Vec::with_capacity(n * n_channels);
        for i in 0..n {
            for ch in 0..n_channels {
                data.push(clip.channel(ch)[i] as f64);
            }
        }
        let matrix = Matrix::from_vec(n, n_channels, data)?;

        let hits = quant::detect_outliers(&matrix, acfg.outlier_z)?;
        let outlier_count = hits.len();
        let mut outliers = hits;
        outliers.truncate(acfg.max_outliers_reported);

        match clip_ref.split {
            Split::Train => train_pool.absorb(&clip),
            Split::Test => test_pool.absorb(&clip),
        }

        if clip_ref.split == Split::Train {
            let corr = quant::correlation_matrix(&matrix)?;
            for (acc, v) in corr_sum.data_mut().iter_mut().zip(corr.data()) {
                *acc += v;
            }
            let p = quant::pca(&matrix)?;
            for (acc, r) in ratio_sum.iter_mut().zip(&p.explained_ratio) {
                *acc += r;
            }
            n_train += 1;
        }

        clip_reports.push(ClipReport {
            clip_id: clip.clip_id.clone(),
            split: clip_ref.split,
            label: clip.header.label,
            n_samples: n,
            n_dropped_samples: dropout.dropped_samples.len(),
            dropout_fraction: dropout.fraction,
            outlier_count,
            outliers,
        });
    }

    for acc in corr_sum.data_mut() {
        *acc /= n_train as f64;
    }
    for acc in &mut ratio_sum {
        *acc /= n_train as f64;
    }
    let mut cumulative = Vec::with_capacity(ratio_sum.len());
    let mut run = 0.0;
    for r in &ratio_sum {
        run += r;
        cumulative.push(run);
    }
    let components_for_threshold = cumulative
        .iter()
        .position(|&c| c >= acfg.variance_threshold)
        .map(|i| i + 1)
        .unwrap_or(ratio_sum.len());

    let mut off_sum = 0.0;
    for i in 0..n_channels {
        for j in 0..n_channels {
            if i != j {
                off_sum += corr_sum.get(i, j).abs();
            }
        }
    }
    let n_off = (n_channels * n_channels).saturating_sub(n_channels).max(1);
    let correlation = CorrelationReport {
        n_train_clips: n_train,
        matrix: (0..n_channels).map(|i| corr_sum.row(i).to_vec()).collect(),
        mean_abs_offdiag: off_sum / n_off as f64,
    };
    let dendrogram = quant::cluster_sensors(&corr_sum)?;

    let summaries_of = |pool: &ChannelPools| -> Result<Vec<FiveNumberSummary>> {
        pool.channels
            .iter()
            .map(|xs| quant::summarize_channel(xs))
            .collect()
    };
    let channel_summaries = SplitSummaries {
        train: summaries_of(&train_pool)?,
        test: summaries_of(&test_pool)?,
    };

    let mut per_channel = Vec::with_capacity(n_channels);
    for ch in 0..n_channels {
        per_channel.push(quant::distribution_shift(
            &train_pool.channels[ch],
            &test_pool.channels[ch],
        )?);
    }
    let flagged_channels: Vec<usize> = per_channel
        .iter()
        .enumerate()
        .filter(|(_, &ks)| ks > acfg.shift_flag_threshold)
        .map(|(ch, _)| ch)
        .collect();

    Ok(AnalyzeDocument {
        generated_at_unix: stamp,
        patient_id: patient.to_string(),
        n_channels,
        sampling_rate,
        clips: clip_reports,
        channel_summaries,
        correlation,
        dendrogram,
        pca: PcaReport {
            explained_ratio: ratio_sum,
            cumulative_ratio: cumulative,
            variance_threshold: acfg.variance_threshold,
            components_for_threshold,
        },
        distribution_shift: ShiftReport {
            per_channel,
            threshold: acfg.shift_flag_threshold,
            flagged_channels,
        },
    })
}
