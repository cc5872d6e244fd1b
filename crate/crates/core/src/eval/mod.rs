//! Long-tailed evaluation: confusion-matrix metrics, rank AUC, Welch tests
//! and the JSON metrics report.

mod metrics;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::gaze::ClassGrouping;

pub use metrics::{
    auc_macro_ovr, average_accuracy, balanced_accuracy, group_average, mcc_multiclass,
    per_class_accuracy, weighted_f1, welch_t_test, AucReport, ConfusionMatrix, GroupAverages,
    WelchResult,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("class {0} has no true samples")]
    EmptyClass(usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{0}")]
    Contract(String),
    #[error("metrics report: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: String,
    pub seed: u64,
    /// Recall per class; `null` for classes absent from the split.
    pub per_class: Vec<Option<f64>>,
    pub groups: GroupAverages,
    pub avg_acc: Option<f64>,
    /// `null` when some class has no samples in the split.
    pub balanced_acc: Option<f64>,
    pub mcc: f64,
    pub auc_macro_ovr: Option<f64>,
    pub weighted_f1: f64,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub auc_excluded_classes: Vec<usize>,
}

impl MetricsReport {
    pub fn to_json<W: Write>(&self, sink: W) -> Result<(), EvalError> {
        Ok(serde_json::to_writer_pretty(sink, self)?)
    }

    pub fn from_json<R: Read>(source: R) -> Result<Self, EvalError> {
        Ok(serde_json::from_reader(source)?)
    }
}

/// Index of the largest score; the first one wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > scores[best] { i } else { best })
}

/// Softmax of a logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Full report from per-sample class scores; predictions are score argmaxes.
pub fn report_from_scores(
    scores: &[Vec<f64>],
    labels: &[usize],
    grouping: &ClassGrouping,
    split: &str,
    seed: u64,
) -> Result<MetricsReport, EvalError> {
    let k = grouping.len();
    if labels.is_empty() {
        return Err(EvalError::Contract(format!(
            "split `{split}` has no samples"
        )));
    }
    let predictions: Vec<usize> = scores.iter().map(|s| argmax(s)).collect();
    let cm = ConfusionMatrix::from_predictions(labels, &predictions, k)?;
    let per_class = per_class_accuracy(&cm);
    let auc = match auc_macro_ovr(scores, labels, k) {
        Ok(a) => Some(a),
        Err(EvalError::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        split: split.to_string(),
        seed,
        groups: group_average(&per_class, grouping)?,
        avg_acc: average_accuracy(&per_class),
        balanced_acc: balanced_accuracy(&cm).ok(),
        mcc: mcc_multiclass(&cm),
        auc_macro_ovr: auc.as_ref().map(|a| a.macro_auc),
        auc_excluded_classes: auc.map(|a| a.excluded).unwrap_or_else(|| (0..k).collect()),
        weighted_f1: weighted_f1(&cm),
        n_samples: labels.len(),
        per_class,
    })
}
