//! Sensitivity and ROC/AUC computation with per-patient and averaged
//! reporting.
//!
//! Predictions are `(probability, is_positive)` pairs. A clip is called
//! positive when its probability is **greater than or equal to** the decision
//! threshold. AUC is computed by trapezoidal integration over all distinct
//! thresholds, which equals the Mann–Whitney pair statistic with ties counted
//! as one half.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts of a binary confusion matrix at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl Confusion {
    /// TP / (TP + FN). NaN when no positives are present.
    pub fn sensitivity(&self) -> f64 {
        let denom = self.true_positives + self.false_negatives;
        self.true_positives as f64 / denom as f64
    }

    /// TN / (TN + FP). NaN when no negatives are present.
    pub fn specificity(&self) -> f64 {
        let denom = self.true_negatives + self.false_positives;
        self.true_negatives as f64 / denom as f64
    }
}

/// Per-patient evaluation results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatientEval {
    pub patient_id: String,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
    /// ROC points as (false positive rate, true positive rate), from (0,0)
    /// to (1,1), nondecreasing in both coordinates.
    pub roc_points: Vec<(f64, f64)>,
}

/// Evaluation report: per-patient metrics plus unweighted averages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_patient: Vec<PatientEval>,
    pub average_sensitivity: f64,
    pub average_specificity: f64,
    pub average_auc: f64,
    pub threshold: f64,
}

/// Counts the confusion matrix of `preds` at `threshold`.
///
/// A prediction is positive iff its probability is `>= threshold`. The four
/// counts partition the input. Errors on empty input or a probability outside
/// `[0, 1]`.
pub fn confusion(preds: &[(f64, bool)], threshold: f64) -> Result<Confusion> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("confusion of zero predictions".into()));
    }
    let mut c = Confusion {
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
    };
    for &(prob, actual) in preds {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::NonFinite(format!(
                "prediction probability {prob} outside [0, 1]"
            )));
        }
        let predicted = prob >= threshold;
        match (predicted, actual) {
            (true, true) => c.true_positives += 1,
            (true, false) => c.false_positives += 1,
            (false, false) => c.true_negatives += 1,
            (false, true) => c.false_negatives += 1,
        }
    }
    Ok(c)
}

/// Computes AUC and the ROC curve of `preds`.
///
/// The curve sweeps all distinct scores as thresholds, from the strictest
/// (nothing positive, the point (0,0)) to the laxest (everything positive,
/// the point (1,1)). Tied scores enter as one block, producing a diagonal
/// segment whose trapezoid contributes exactly half per tied
/// positive-negative pair, so the result equals the Mann–Whitney statistic.
///
/// Errors when only one class is present.
pub fn roc_auc(preds: &[(f64, bool)]) -> Result<(f64, Vec<(f64, f64)>)> {
    let n_pos = preds.iter().filter(|&&(_, y)| y).count();
    let n_neg = preds.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass(format!(
            "ROC needs both classes, got {n_pos} positive and {n_neg} negative"
        )));
    }
    if let Some(&(bad, _)) = preds.iter().find(|&&(p, _)| !p.is_finite()) {
        return Err(Error::NonFinite(format!("prediction score {bad}")));
    }

    let mut sorted: Vec<(f64, bool)> = preds.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are finite"));

    let mut points = Vec::with_capacity(sorted.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        // Consume the whole block of predictions tied at this score.
        let (mut block_tp, mut block_fp) = (0usize, 0usize);
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                block_tp += 1;
            } else {
                block_fp += 1;
            }
            i += 1;
        }
        let prev_tpr = tp as f64 / n_pos as f64;
        tp += block_tp;
        fp += block_fp;
        let fpr = fp as f64 / n_neg as f64;
        let tpr = tp as f64 / n_pos as f64;
        let prev_fpr = points.last().expect("seeded with (0,0)").0;
        auc += (fpr - prev_fpr) * (prev_tpr + tpr) * 0.5;
        points.push((fpr, tpr));
    }
    Ok((auc, points))
}

/// Evaluates per-patient predictions and averages across patients.
///
/// Each entry is `(patient_id, predictions)`. Every patient must have both
/// classes present. Averages are unweighted arithmetic means over patients.
pub fn evaluate(
    per_patient: &[(String, Vec<(f64, bool)>)],
    threshold: f64,
) -> Result<EvalReport> {
    if per_patient.is_empty() {
        return Err(Error::EmptyInput("evaluate with zero patients".into()));
    }
    let mut evals = Vec::with_capacity(per_patient.len());
    for (patient_id, preds) in per_patient {
        let c = confusion(preds, threshold)?;
        let (auc, roc_points) = roc_auc(preds)?;
        evals.push(PatientEval {
            patient_id: patient_id.clone(),
            sensitivity: c.sensitivity(),
            specificity: c.specificity(),
            auc,
            roc_points,
        });
    }
    let n = evals.len() as f64;
    let report = EvalReport {
        average_sensitivity: evals.iter().map(|e| e.sensitivity).sum::<f64>() / n,
        average_specificity: evals.iter().map(|e| e.specificity).sum::<f64>() / n,
        average_auc: evals.iter().map(|e| e.auc).sum::<f64>() / n,
        per_patient: evals,
        threshold,
    };
    Ok(report)
}
