use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::gaze::{ClassGrouping, Group};

use super::EvalError;

/// `K x K` counts; rows are true classes, columns predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self, EvalError> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(EvalError::Contract(
                "confusion matrix must be square".into(),
            ));
        }
        Ok(Self {
            n_classes: k,
            counts: rows.concat(),
        })
    }

    pub fn from_predictions(
        labels: &[usize],
        predictions: &[usize],
        n_classes: usize,
    ) -> Result<Self, EvalError> {
        if labels.len() != predictions.len() {
            return Err(EvalError::Contract(format!(
                "{} labels but {} predictions",
                labels.len(),
                predictions.len()
            )));
        }
        let mut cm = Self::new(n_classes);
        for (&y, &p) in labels.iter().zip(predictions) {
            if y >= n_classes || p >= n_classes {
                return Err(EvalError::Contract(format!(
                    "class index out of range: ({y}, {p})"
                )));
            }
            cm.add(y, p);
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.n_classes + predicted] += 1;
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        (0..self.n_classes).map(|j| self.get(class, j)).sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, class)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.n_classes.max(1))
            .map(<[u64]>::to_vec)
            .collect()
    }
}

/// Recall of every class; `None` for classes without true samples.
pub fn per_class_accuracy(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.n_classes())
        .map(|k| {
            let n = cm.row_sum(k);
            (n > 0).then(|| cm.get(k, k) as f64 / n as f64)
        })
        .collect()
}

/// Mean per-class recall; every class needs at least one true sample.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let recalls = per_class_accuracy(cm);
    if recalls.is_empty() {
        return Err(EvalError::Contract("no classes".into()));
    }
    let mut sum = 0.0;
    for (k, r) in recalls.iter().enumerate() {
        sum += r.ok_or(EvalError::EmptyClass(k))?;
    }
    Ok(sum / recalls.len() as f64)
}

/// Unweighted mean of the per-class accuracies that are present.
pub fn average_accuracy(per_class: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupAverages {
    pub head: Option<f64>,
    pub medium: Option<f64>,
    pub tail: Option<f64>,
}

impl GroupAverages {
    pub fn get(&self, group: Group) -> Option<f64> {
        match group {
            Group::Head => self.head,
            Group::Medium => self.medium,
            Group::Tail => self.tail,
        }
    }
}

/// Unweighted per-group means; a group without measured classes is absent.
pub fn group_average(
    per_class: &[Option<f64>],
    grouping: &ClassGrouping,
) -> Result<GroupAverages, EvalError> {
    if grouping.len() != per_class.len() {
        return Err(EvalError::Contract(format!(
            "grouping covers {} classes, metrics have {}",
            grouping.len(),
            per_class.len()
        )));
    }
    let mean_of = |group| {
        let members: Vec<Option<f64>> = grouping
            .members(group)
            .iter()
            .map(|&k| per_class[k])
            .collect();
        average_accuracy(&members)
    };
    Ok(GroupAverages {
        head: mean_of(Group::Head),
        medium: mean_of(Group::Medium),
        tail: mean_of(Group::Tail),
    })
}

/// Multiclass Matthews correlation (Gorodkin's `R_K`); 0 when undefined.
pub fn mcc_multiclass(cm: &ConfusionMatrix) -> f64 {
    let k = cm.n_classes();
    let s = cm.total() as f64;
    let c: f64 = (0..k).map(|i| cm.get(i, i) as f64).sum();
    let t: Vec<f64> = (0..k).map(|i| cm.row_sum(i) as f64).collect();
    let p: Vec<f64> = (0..k).map(|i| cm.col_sum(i) as f64).collect();
    let tp: f64 = t.iter().zip(&p).map(|(a, b)| a * b).sum();
    let pp: f64 = p.iter().map(|v| v * v).sum();
    let tt: f64 = t.iter().map(|v| v * v).sum();
    let denom = ((s * s - pp) * (s * s - tt)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (c * s - tp) / denom
    }
}

/// Support-weighted mean of per-class F1; undefined F1 counts as 0.
pub fn weighted_f1(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total() as f64;
    if total == 0.0 {
        return 0.0;
    }
    (0..cm.n_classes())
        .map(|k| {
            let tp = cm.get(k, k) as f64;
            let support = cm.row_sum(k) as f64;
            let predicted = cm.col_sum(k) as f64;
            let denom = support + predicted;
            let f1 = if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
            f1 * support / total
        })
        .sum()
}

/// One-vs-rest AUC of every class plus their macro average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub macro_auc: f64,
    pub per_class: Vec<Option<f64>>,
    /// Classes without positives or negatives, left out of the average.
    pub excluded: Vec<usize>,
}

/// Mann-Whitney AUC of `scores` for positives vs negatives; ties count 1/2.
fn rank_auc(pairs: &mut [(f64, bool)]) -> f64 {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_pos = pairs.iter().filter(|p| p.1).count() as f64;
    let n_neg = pairs.len() as f64 - n_pos;
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        // average 1-based rank of the tie block
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg_rank * pairs[i..j].iter().filter(|p| p.1).count() as f64;
        i = j;
    }
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

pub fn auc_macro_ovr(
    scores: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
) -> Result<AucReport, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::Contract(format!(
            "{} score rows but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(row) = scores.iter().find(|r| r.len() != n_classes) {
        return Err(EvalError::Contract(format!(
            "score row of length {} for {n_classes} classes",
            row.len()
        )));
    }
    let mut per_class = Vec::with_capacity(n_classes);
    let mut excluded = Vec::new();
    for k in 0..n_classes {
        let mut pairs: Vec<(f64, bool)> = scores
            .iter()
            .zip(labels)
            .map(|(s, &y)| (s[k], y == k))
            .collect();
        let n_pos = pairs.iter().filter(|p| p.1).count();
        if n_pos == 0 || n_pos == pairs.len() {
            excluded.push(k);
            per_class.push(None);
        } else {
            per_class.push(Some(rank_auc(&mut pairs)));
        }
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(EvalError::Degenerate(
            "no class has both positives and negatives".into(),
        ));
    }
    Ok(AucReport {
        macro_auc: present.iter().sum::<f64>() / present.len() as f64,
        per_class,
        excluded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test of `mean(a) - mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::Degenerate(format!(
            "Welch test needs two samples per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    if sa + sb == 0.0 {
        return Err(EvalError::Degenerate(
            "both samples have zero variance".into(),
        ));
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let df =
        (sa + sb).powi(2) / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| EvalError::Degenerate(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(WelchResult { t, df, p })
}
