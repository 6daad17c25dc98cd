//! `ictus eval` and `ictus predict` — run a trained model over a manifest.
//!
//! Both commands reconstruct the exact preprocessing the model was trained
//! with from the metadata stored inside model.json (pipeline, STFT,
//! standardizer), so a model file is self-contained: no cache or original
//! config is needed at inference time.


use serde::Serialize;

use ictus_core::eval::{evaluate, PatientEval};
use ictus_core::ieeg::{self, ClipRef, Label, Split};
use ictus_core::model::{self, AggregationRule, BatchState, ModelMeta, MultiScaleNet};
use ictus_core::{signal, spectro, Error, Result};

use crate::config::{required_path, EvalSettings, RunConfig};
use crate::report::{csv_float, ensure_dir, timestamp, write_csv, write_json};
use crate::{EvalArgs, PredictArgs};

/// A clip that produced no prediction, and why.
#[derive(Debug, Clone, Serialize)]
pub struct SkippedClip {
    pub clip_id: String,
    pub patient_id: String,
    pub reason: &'static str,
}

/// eval.json layout.
#[derive(Serialize)]
struct EvalDocument<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at_unix: Option<u64>,
    rule: AggregationRule,
    threshold: f64,
    average_sensitivity: f64,
    average_specificity: f64,
    average_auc: f64,
    per_patient: &'a [PatientEval],
    skipped_clips: &'a [SkippedClip],
}

enum ClipOutcome {
    Skipped(&'static str),
    Prob(f64),
}

/// Decimate → segment → spectrogram → standardize → network → aggregate,
/// all per the model's stored metadata.
fn clip_probability(
    clip_ref: &ClipRef,
    net: &MultiScaleNet,
    meta: &ModelMeta,
    rule: AggregationRule,
    st: &mut BatchState,
) -> Result<ClipOutcome> {
    let clip = clip_ref.load()?;
    let dropout = signal::detect_dropout(&clip);
    if dropout.fraction >= meta.pipeline.dropout_exclude_threshold {
        return Ok(ClipOutcome::Skipped("dropout_excluded"));
    }
    let decimated = signal::decimate(&clip, &meta.pipeline)?;
    let segments = signal::segment_clip(&decimated, &meta.pipeline)?;
    let want = (
        meta.input_shape.n_channels,
        meta.input_shape.n_freq,
        meta.input_shape.n_frames,
    );
    let mut tensors: Vec<Vec<f64>> = Vec::with_capacity(segments.len());
    for seg in &segments {
        let mut tensor = spectro::segment_to_tensor(seg, &meta.stft)?;
        if tensor.shape() != want {
            return Err(Error::ShapeMismatch(format!(
                "clip {} yields {}x{}x{} tensors but the model expects {}x{}x{}",
                clip.clip_id,
                tensor.shape().0,
                tensor.shape().1,
                tensor.shape().2,
                want.0,
                want.1,
                want.2
            )));
        }
        meta.standardizer.apply(&mut tensor)?;
        tensors.push(tensor.values);
    }
    let pred = model::predict_clip(net, &clip.clip_id, &tensors, tensors.len(), rule, st)?;
    Ok(ClipOutcome::Prob(pred.clip_prob))
}

fn load_model_and_data(cfg: &RunConfig) -> Result<(MultiScaleNet, ModelMeta, ieeg::Dataset)> {
    let model_path = required_path(&cfg.paths.model, "model")?;
    let (net, meta) = model::load_model(model_path)?;
    let manifest = required_path(&cfg.paths.data, "data")?;
    let dataset = ieeg::load_manifest(manifest)?;
    Ok((net, meta, dataset))
}

fn rule_override(base: AggregationRule, flag: &Option<String>) -> Result<AggregationRule> {
    match flag {
        None => Ok(base),
        Some(s) => s.parse(),
    }
}

pub fn run_eval(args: &EvalArgs) -> Result<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let rule = rule_override(cfg.eval.rule, &args.rule)?;
    let threshold = args.threshold.unwrap_or(cfg.eval.threshold);
    EvalSettings { rule, threshold }.validate()?;
    let (net, meta, dataset) = load_model_and_data(&cfg)?;
    ensure_dir(&args.out)?;

    let mut st = BatchState::default();
    let mut per_patient: Vec<(String, Vec<(f64, bool)>)> = Vec::new();
    let mut skipped: Vec<SkippedClip> = Vec::new();
    for patient in dataset.patient_ids() {
        let mut preds: Vec<(f64, bool)> = Vec::new();
        for clip_ref in dataset
            .clips
            .iter()
            .filter(|c| c.patient_id == patient && c.split == Split::Test)
        {
            let Some(target) = clip_ref.header.label.target() else {
                skipped.push(SkippedClip {
                    clip_id: clip_ref.clip_id.clone(),
                    patient_id: patient.clone(),
                    reason: "unlabeled",
                });
                continue;
            };
            match clip_probability(clip_ref, &net, &meta, rule, &mut st)? {
                ClipOutcome::Skipped(reason) => skipped.push(SkippedClip {
                    clip_id: clip_ref.clip_id.clone(),
                    patient_id: patient.clone(),
                    reason,
                }),
                ClipOutcome::Prob(p) => preds.push((p, target)),
            }
        }
        if !preds.is_empty() {
            per_patient.push((patient, preds));
        }
    }
    if per_patient.is_empty() {
        return Err(Error::EmptyInput(
            "no labeled test clips produced predictions".into(),
        ));
    }
    let report = evaluate(&per_patient, threshold)?;

    let doc = EvalDocument {
        generated_at_unix: timestamp(args.no_timestamp),
        rule,
        threshold: report.threshold,
        average_sensitivity: report.average_sensitivity,
        average_specificity: report.average_specificity,
        average_auc: report.average_auc,
        per_patient: &report.per_patient,
        skipped_clips: &skipped,
    };
    let eval_path = args.out.join("eval.json");
    write_json(&eval_path, &doc)?;

    let mut rows = Vec::new();
    for pe in &report.per_patient {
        for (fpr, tpr) in &pe.roc_points {
            rows.push(format!("{},{},{}", pe.patient_id, csv_float(*fpr), csv_float(*tpr)));
        }
    }
    write_csv(&args.out.join("roc.csv"), "patient_id,fpr,tpr", &rows)?;

    println!(
        "eval: average AUC {:.4}, sensitivity {:.4}, specificity {:.4} at threshold {}",
        report.average_auc, report.average_sensitivity, report.average_specificity, report.threshold
    );
    println!("report: {}", eval_path.display());
    Ok(())
}

pub fn run_predict(args: &PredictArgs) -> Result<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let rule = rule_override(cfg.eval.rule, &args.rule)?;
    let (net, meta, dataset) = load_model_and_data(&cfg)?;
    ensure_dir(&args.out)?;

    let mut st = BatchState::default();
    let mut rows: Vec<String> = Vec::new();
    let mut n_skipped = 0usize;
    for clip_ref in &dataset.clips {
        match clip_probability(clip_ref, &net, &meta, rule, &mut st)? {
            ClipOutcome::Skipped(_) => n_skipped += 1,
            ClipOutcome::Prob(p) => {
                let label = match clip_ref.header.label {
                    Label::Unlabeled => String::new(),
                    other => other.to_string(),
                };
                rows.push(format!(
                    "{},{},{},{},{label}",
                    clip_ref.clip_id,
                    clip_ref.patient_id,
                    clip_ref.split,
                    csv_float(p)
                ));
            }
        }
    }
    let csv_path = args.out.join("predictions.csv");
    write_csv(&csv_path, "clip_id,patient_id,split,clip_prob,label", &rows)?;
    println!(
        "predict: {} clips scored, {} skipped -> {}",
        rows.len(),
        n_skipped,
        csv_path.display()
    );
    Ok(())
}
