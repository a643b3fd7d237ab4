//! Evaluation metrics: accuracy, per-class precision/recall/F1, their
//! unweighted mean, and the ranking quality of a binary scorer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("ranking quality needs both outcomes, got {pos} positive and {neg} negative")]
    OneSided { pos: usize, neg: usize },
}

/// Fraction of predictions matching their labels.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> f64 {
    assert_eq!(preds.len(), labels.len(), "one prediction per label");
    assert!(!preds.is_empty(), "cannot score zero predictions");
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / preds.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall, and F1 for every class id below `classes`. A zero
/// denominator scores 0, so a class absent from both predictions and
/// labels contributes an all-zero row.
pub fn f1_per_class(preds: &[usize], labels: &[usize], classes: usize) -> Vec<ClassScores> {
    assert!(classes >= 2, "need at least two classes");
    assert_eq!(preds.len(), labels.len(), "one prediction per label");
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut missed = vec![0usize; classes];
    for (&p, &l) in preds.iter().zip(labels) {
        assert!(p < classes && l < classes, "class id out of range");
        if p == l {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            missed[l] += 1;
        }
    }
    (0..classes)
        .map(|c| {
            let precision = ratio(tp[c], tp[c] + fp[c]);
            let recall = ratio(tp[c], tp[c] + missed[c]);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassScores { precision, recall, f1 }
        })
        .collect()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Unweighted mean of the per-class F1 scores.
pub fn macro_f1(preds: &[usize], labels: &[usize], classes: usize) -> f64 {
    let scores = f1_per_class(preds, labels, classes);
    scores.iter().map(|s| s.f1).sum::<f64>() / classes as f64
}

/// Probability that a random positive outranks a random negative, with
/// ties counting half. Computed from tie-averaged ranks, which equals
/// enumerating all positive/negative pairs.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    assert_eq!(scores.len(), labels.len(), "one score per label");
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::OneSided { pos, neg });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut positive_rank_sum = 0.0;
    let mut at = 0;
    while at < idx.len() {
        let mut end = at;
        while end < idx.len() && scores[idx[end]] == scores[idx[at]] {
            end += 1;
        }
        // Ranks are 1-based; a tie group shares the mean of its ranks.
        let shared = (at + 1 + end) as f64 / 2.0;
        for &k in &idx[at..end] {
            if labels[k] {
                positive_rank_sum += shared;
            }
        }
        at = end;
    }
    let concordant = positive_rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(concordant / (pos * neg) as f64)
}

/// Every score of one evaluation. `auc` is present only when both
/// outcomes occur in the evaluated set and probabilities were available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    pub macro_f1: f64,
    pub auc: Option<f64>,
}

impl Metrics {
    /// The F1 of class 1; the headline number for pair scoring, where
    /// class 1 means "same functionality".
    pub fn positive_f1(&self) -> f64 {
        self.per_class.get(1).map(|s| s.f1).unwrap_or(0.0)
    }
}

/// Scores hard class predictions.
pub fn classification_metrics(preds: &[usize], labels: &[usize], classes: usize) -> Metrics {
    Metrics {
        accuracy: accuracy(preds, labels),
        per_class: f1_per_class(preds, labels, classes),
        macro_f1: macro_f1(preds, labels, classes),
        auc: None,
    }
}

/// Scores pair probabilities, thresholding at 0.5 for the counting
/// metrics. The ranking quality is omitted when the set is one-sided.
pub fn clone_metrics(scores: &[f64], labels: &[bool]) -> Metrics {
    let preds: Vec<usize> = scores.iter().map(|&s| usize::from(s >= 0.5)).collect();
    let as_ids: Vec<usize> = labels.iter().map(|&b| usize::from(b)).collect();
    Metrics {
        accuracy: accuracy(&preds, &as_ids),
        per_class: f1_per_class(&preds, &as_ids, 2),
        macro_f1: macro_f1(&preds, &as_ids, 2),
        auc: auc(scores, labels).ok(),
    }
}
