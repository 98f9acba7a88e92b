use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann-Whitney statistic; tied scores
/// count one half. Labels are +1 / -1.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l > 0.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Evaluation("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum of positives keeps tied mid-ranks integral
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u64;
        let pos = order[i..=j].iter().filter(|&&k| labels[k] > 0.0).count() as u64;
        twice_rank_sum += twice_mid * pos;
        i = j + 1;
    }
    let np = n_pos as u64;
    // twice the count of (pos > neg) pairs plus ties
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok(twice_u as f64 / (2 * np * n_neg as u64) as f64)
}

fn counts(preds: &[f64], labels: &[f64]) -> (usize, usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for (&p, &l) in preds.iter().zip(labels) {
        match (p > 0.0, l > 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    (tp, fp, fn_)
}

/// TP / (TP + FP); 1.0 and a `true` flag when nothing is predicted positive.
pub fn precision(preds: &[f64], labels: &[f64]) -> (f64, bool) {
    let (tp, fp, _) = counts(preds, labels);
    if tp + fp == 0 {
        (1.0, true)
    } else {
        (tp as f64 / (tp + fp) as f64, false)
    }
}

/// TP / (TP + FN); zero when there are no positives.
pub fn recall(preds: &[f64], labels: &[f64]) -> f64 {
    let (tp, _, fn_) = counts(preds, labels);
    if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    /// Precision was defined by convention because nothing was predicted
    /// positive.
    pub precision_degenerate: bool,
}

pub fn metric_set(scores: &[f64], preds: &[f64], labels: &[f64]) -> Result<MetricSet> {
    let (precision, precision_degenerate) = precision(preds, labels);
    Ok(MetricSet {
        auc: auc(scores, labels)?,
        precision,
        recall: recall(preds, labels),
        precision_degenerate,
    })
}
