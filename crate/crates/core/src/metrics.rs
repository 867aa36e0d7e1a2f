//! Accuracy, recall, one-vs-rest ROC AUC and the confusion matrix.
//!
//! AUC is exact: scores are sorted once and the ROC curve is integrated with
//! the trapezoid rule over tied-score groups, which equals the Mann–Whitney
//! pair count `P(pos > neg) + ½·P(pos = neg)`. Training frameworks often
//! report a binned approximation instead; values can differ slightly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};
use crate::train::sample_loss;

/// Class names in label order.
pub const CLASS_NAMES: [&str; 4] = [
    "adenocarcinoma",
    "large cell carcinoma",
    "squamous cell carcinoma",
    "normal",
];

/// Tolerance on probability row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Macro,
    #[default]
    Micro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConventions {
    #[serde(default)]
    pub auc_averaging: Averaging,
    #[serde(default = "default_threshold")]
    pub recall_threshold: f64,
}

fn default_threshold() -> f64 {
    0.5
}

impl Default for MetricConventions {
    fn default() -> Self {
        MetricConventions {
            auc_averaging: Averaging::Micro,
            recall_threshold: default_threshold(),
        }
    }
}

/// Probabilities and true labels of an evaluated sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalBatch {
    probs: Vec<f64>,
    classes: usize,
    labels: Vec<usize>,
}

impl EvalBatch {
    pub fn new<T: Scalar>(probs: &Tensor<T>, labels: Vec<usize>) -> Result<Self> {
        let (n, k) = probs.dims2()?;
        Self::from_rows(probs.data().iter().map(|v| v.as_f64()).collect(), k, labels).and_then(|b| {
            if b.len() != n {
                Err(Error::Label(format!("{n} probability rows but {} labels", b.len())))
            } else {
                Ok(b)
            }
        })
    }

    pub fn from_rows(probs: Vec<f64>, classes: usize, labels: Vec<usize>) -> Result<Self> {
        if classes < 2 || probs.len() != classes * labels.len() {
            return Err(Error::Label(format!(
                "{} probabilities do not form {} rows of {classes} classes",
                probs.len(),
                labels.len()
            )));
        }
        for (i, (row, &label)) in probs.chunks(classes).zip(&labels).enumerate() {
            if label >= classes {
                return Err(Error::Label(format!("sample {i}: label {label} out of range")));
            }
            let total: f64 = row.iter().sum();
            if !row.iter().all(|p| p.is_finite() && *p >= 0.0) || (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Label(format!(
                    "sample {i}: probability row does not sum to 1 (sum {total})"
                )));
            }
        }
        Ok(EvalBatch {
            probs,
            classes,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.classes..(i + 1) * self.classes]
    }

    fn rows(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.probs.chunks(self.classes).zip(self.labels.iter().copied())
    }

    fn non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::Data("metric over an empty batch".into()))
        } else {
            Ok(())
        }
    }

    /// Argmax class of every row.
    pub fn predictions(&self) -> Vec<usize> {
        self.probs.chunks(self.classes).map(argmax).collect()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(batch: &EvalBatch) -> Result<f64> {
    batch.non_empty()?;
    let correct = batch.rows().filter(|&(row, label)| argmax(row) == label).count();
    Ok(correct as f64 / batch.len() as f64)
}

/// Micro recall with per-class positivity decided by `prob > threshold`.
///
/// Each sample has exactly one true class, so TP + FN is the sample count and
/// a sample is a true positive iff its true-class probability exceeds the
/// threshold.
pub fn recall_threshold(batch: &EvalBatch, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("recall threshold {threshold} not in (0, 1)")));
    }
    batch.non_empty()?;
    let tp = batch.rows().filter(|&(row, label)| row[label] > threshold).count();
    Ok(tp as f64 / batch.len() as f64)
}

/// Unweighted mean of per-class argmax recall over classes present in the
/// batch.
pub fn recall_macro(batch: &EvalBatch) -> Result<f64> {
    batch.non_empty()?;
    let per_class = per_class_recall(batch);
    let present: Vec<f64> = per_class.into_iter().flatten().collect();
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

fn per_class_recall(batch: &EvalBatch) -> Vec<Option<f64>> {
    let cm = confusion_counts(batch);
    cm.iter()
        .enumerate()
        .map(|(c, row)| {
            let support: usize = row.iter().sum();
            (support > 0).then(|| row[c] as f64 / support as f64)
        })
        .collect()
}

fn confusion_counts(batch: &EvalBatch) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; batch.classes]; batch.classes];
    for (row, label) in batch.rows() {
        m[label][argmax(row)] += 1;
    }
    m
}

/// `[true][predicted]` argmax counts.
pub fn confusion_matrix(batch: &EvalBatch) -> Result<Vec<Vec<usize>>> {
    batch.non_empty()?;
    Ok(confusion_counts(batch))
}

/// Exact binary ROC AUC of `scores` against `positive` flags.
///
/// Returns `None` when either outcome is missing.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Result<Option<f64>> {
    if scores.len() != positive.len() {
        return Err(Error::Label("scores and outcomes differ in length".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NumericInput("roc_auc"));
    }
    let npos = positive.iter().filter(|&&p| p).count();
    let nneg = positive.len() - npos;
    if npos == 0 || nneg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // Walk thresholds from high to low; each tied group adds one ROC segment.
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut dtp, mut dfp) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                dtp += 1;
            } else {
                dfp += 1;
            }
            i += 1;
        }
        // trapezoid: width dfp, heights tp and tp + dtp (in counts, doubled)
        area += (dfp * (2 * tp + dtp)) as f64;
        tp += dtp;
        fp += dfp;
    }
    debug_assert_eq!(fp as usize, nneg);
    Ok(Some(area / (2.0 * npos as f64 * nneg as f64)))
}

/// One-vs-rest AUC of each class; `None` where the class lacks positives or
/// negatives.
pub fn per_class_auc(batch: &EvalBatch) -> Result<Vec<Option<f64>>> {
    batch.non_empty()?;
    (0..batch.classes)
        .map(|c| {
            let scores: Vec<f64> = batch.rows().map(|(row, _)| row[c]).collect();
            let positive: Vec<bool> = batch.labels.iter().map(|&l| l == c).collect();
            binary_auc(&scores, &positive)
        })
        .collect()
}

pub fn roc_auc(batch: &EvalBatch, averaging: Averaging) -> Result<f64> {
    match averaging {
        Averaging::Macro => {
            let per_class = per_class_auc(batch)?;
            let mut total = 0.0;
            for (class, auc) in per_class.iter().enumerate() {
                match auc {
                    Some(a) => total += a,
                    None => {
                        let positives = batch.labels.iter().filter(|&&l| l == class).count();
                        return Err(Error::UndefinedClass {
                            class,
                            positives,
                            negatives: batch.len() - positives,
                        });
                    }
                }
            }
            Ok(total / batch.classes as f64)
        }
        Averaging::Micro => {
            if batch.len() < 2 {
                return Err(Error::Data("micro AUC needs at least 2 samples".into()));
            }
            let positive: Vec<bool> = batch
                .labels
                .iter()
                .flat_map(|&l| (0..batch.classes).map(move |c| c == l))
                .collect();
            binary_auc(&batch.probs, &positive)?
                .ok_or_else(|| Error::Data("micro AUC needs both outcomes".into()))
        }
    }
}

/// Mean clamped negative log-likelihood of the true class.
pub fn log_loss(batch: &EvalBatch) -> Result<f64> {
    batch.non_empty()?;
    let total: f64 = batch.rows().map(|(row, label)| sample_loss(row[label])).sum();
    Ok(total / batch.len() as f64)
}

/// The four headline numbers plus the alternative conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    /// Headline AUC under the configured averaging.
    pub auc: f64,
    pub auc_micro: f64,
    pub auc_macro: Option<f64>,
    /// Threshold-based micro recall.
    pub recall: f64,
    pub recall_macro: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub support: usize,
    pub recall: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: usize,
    pub conventions: MetricConventions,
    pub summary: MetricSummary,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Vec<Vec<usize>>,
}

impl MetricsReport {
    pub fn compute(batch: &EvalBatch, conventions: MetricConventions) -> Result<Self> {
        batch.non_empty()?;
        let auc_micro = roc_auc(batch, Averaging::Micro)?;
        let auc_macro = match roc_auc(batch, Averaging::Macro) {
            Ok(a) => Some(a),
            Err(Error::UndefinedClass { .. }) => None,
            Err(e) => return Err(e),
        };
        let auc = match conventions.auc_averaging {
            Averaging::Micro => auc_micro,
            Averaging::Macro => auc_macro.ok_or_else(|| {
                Error::Data("macro AUC undefined: some class has no positives or no negatives".into())
            })?,
        };
        let summary = MetricSummary {
            accuracy: accuracy(batch)?,
            auc,
            auc_micro,
            auc_macro,
            recall: recall_threshold(batch, conventions.recall_threshold)?,
            recall_macro: recall_macro(batch)?,
            loss: log_loss(batch)?,
        };
        let confusion = confusion_counts(batch);
        let per_class = per_class_recall(batch)
            .into_iter()
            .zip(per_class_auc(batch)?)
            .enumerate()
            .map(|(c, (recall, auc))| ClassMetrics {
                name: CLASS_NAMES.get(c).map_or_else(|| format!("class {c}"), |s| s.to_string()),
                support: confusion[c].iter().sum(),
                recall,
                auc,
            })
            .collect();
        Ok(MetricsReport {
            samples: batch.len(),
            conventions,
            summary,
            per_class,
            confusion,
        })
    }
}
