//! Accuracy, per-class recall, confusion matrices and one-vs-rest ROC.
//!
//! Quantities that are undefined for a class (no true rows, or no
//! positives/negatives for ROC) are `None` and serialize as `null`.

use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::ensemble::Classifier;
use crate::error::{Error, Result};
use crate::tree::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub eval_set_name: String,
    pub class_names: Vec<String>,
    pub n_rows: usize,
    pub overall_accuracy: f64,
    /// Recall per class.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub roc: Vec<Option<Vec<RocPoint>>>,
    pub auc: Vec<Option<f64>>,
}

/// Scores every row of `ds` with `model` and summarizes.
pub fn evaluate<M: Classifier + ?Sized>(
    model: &M,
    ds: &FeatureDataset,
    name: &str,
) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::InvalidData(format!("eval set {name:?} is empty")));
    }
    if model.n_features() != ds.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: ds.n_features(),
        });
    }
    if model.n_classes() != ds.n_classes() {
        return Err(Error::InvalidData(format!(
            "model predicts {} classes, eval set {name:?} has {}",
            model.n_classes(),
            ds.n_classes()
        )));
    }
    let scores: Vec<Vec<f64>> = ds
        .rows()
        .map(|r| model.predict_proba(r))
        .collect::<Result<_>>()?;
    Ok(report_from_scores(&scores, ds.labels(), ds.class_names(), name))
}

/// Builds a report from precomputed probability rows.
pub fn report_from_scores(
    scores: &[Vec<f64>],
    labels: &[usize],
    class_names: &[String],
    name: &str,
) -> EvalReport {
    let k = class_names.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (s, &y) in scores.iter().zip(labels) {
        confusion[y][argmax(s)] += 1;
    }
    let n = labels.len();
    let trace: usize = (0..k).map(|c| confusion[c][c]).sum();
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| row[c] as f64 / total as f64)
        })
        .collect();
    let (roc, auc) = (0..k)
        .map(|c| match roc_auc(scores, labels, c) {
            Some((points, a)) => (Some(points), Some(a)),
            None => (None, None),
        })
        .unzip();
    EvalReport {
        eval_set_name: name.to_owned(),
        class_names: class_names.to_vec(),
        n_rows: n,
        overall_accuracy: trace as f64 / n as f64,
        per_class_accuracy,
        confusion,
        roc,
        auc,
    }
}

/// One-vs-rest ROC curve and trapezoid AUC for `class`.
///
/// Thresholds sweep every distinct score from high to low; rows sharing a
/// score enter together, giving one diagonal step per tie group. Returns
/// `None` when the class has no positives or no negatives.
pub fn roc_auc(scores: &[Vec<f64>], labels: &[usize], class: usize) -> Option<(Vec<RocPoint>, f64)> {
    let mut pairs: Vec<(f64, bool)> = scores
        .iter()
        .zip(labels)
        .map(|(s, &y)| (s[class], y == class))
        .collect();
    let positives = pairs.iter().filter(|p| p.1).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (p, q) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let score = pairs[i].0;
        let (prev_tp, prev_fp) = (tp, fp);
        while i < pairs.len() && pairs[i].0 == score {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // Integer trapezoid keeps the area exact until the final division.
        area += ((fp - prev_fp) * (tp + prev_tp)) as f64;
        points.push(RocPoint {
            fpr: fp as f64 / q,
            tpr: tp as f64 / p,
        });
    }
    Some((points, area / (2.0 * p * q)))
}
