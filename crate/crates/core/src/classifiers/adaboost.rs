use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::classifiers::{check_training_data, TrainedModel};
use crate::error::{Error, Result};

/// Weighted errors below this count as a perfect stump.
const PERFECT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
}

/// Predicts `polarity` when `x[feature] > threshold`, else `-polarity`.
/// A threshold of `-inf` makes a constant stump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: f64,
    pub alpha: f64,
    /// Weighted training error when the stump was accepted.
    pub error: f64,
}

impl Stump {
    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        if x[self.feature] > self.threshold {
            self.polarity
        } else {
            -self.polarity
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostModel {
    pub stumps: Vec<Stump>,
    pub width: usize,
    pub seed: u64,
}

impl AdaBoostModel {
    /// `sum(alpha h) / sum(alpha)`, zero for an empty ensemble.
    pub fn weighted_vote(&self, x: ArrayView1<f64>) -> f64 {
        let total: f64 = self.stumps.iter().map(|s| s.alpha).sum();
        if self.stumps.is_empty() || total <= 0.0 {
            return 0.0;
        }
        self.stumps.iter().map(|s| s.alpha * s.predict(x)).sum::<f64>() / total
    }

    pub fn truncated(&self, n: usize) -> AdaBoostModel {
        AdaBoostModel {
            stumps: self.stumps[..n.min(self.stumps.len())].to_vec(),
            width: self.width,
            seed: self.seed,
        }
    }
}

/// Lowest weighted error over all features and thresholds; earlier features
/// and smaller thresholds win ties.
fn best_stump(x: &Array2<f64>, y: &[f64], w: &[f64], sorted: &[Vec<usize>]) -> (usize, f64, f64, f64) {
    let total: f64 = w.iter().sum();
    let pos_total: f64 = y.iter().zip(w).filter(|(l, _)| **l > 0.0).map(|(_, v)| v).sum();
    // constant stump: everything above -inf
    let const_err = total - pos_total;
    let (mut err, mut pol) = if const_err <= total - const_err { (const_err, 1.0) } else { (total - const_err, -1.0) };
    let mut best = (0, f64::NEG_INFINITY, pol, err);

    for (f, order) in sorted.iter().enumerate() {
        // error of "predict +1 above" with the threshold below order[k]
        let mut e = const_err;
        for k in 1..order.len() {
            let prev = order[k - 1];
            e += if y[prev] > 0.0 { w[prev] } else { -w[prev] };
            let (a, b) = (x[[prev, f]], x[[order[k], f]]);
            if a == b {
                continue;
            }
            let (cand, cand_pol) = if e <= total - e { (e, 1.0) } else { (total - e, -1.0) };
            if cand < err {
                err = cand;
                pol = cand_pol;
                let mut thr = 0.5 * (a + b);
                if thr >= b {
                    thr = a;
                }
                best = (f, thr, pol, err);
            }
        }
    }
    (best.0, best.1, best.2, (best.3 / total).max(0.0))
}

/// Discrete AdaBoost with decision stumps. Deterministic; the seed is only
/// recorded.
pub fn train_adaboost(x: &Array2<f64>, y: &[f64], p: &AbParams, seed: u64) -> Result<TrainedModel> {
    check_training_data(x, y)?;
    if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) || p.n_estimators == 0 {
        return Err(Error::invalid(format!(
            "AdaBoost needs learning_rate > 0 and n_estimators >= 1, got {p:?}"
        )));
    }
    let (n, d) = x.dim();
    let sorted: Vec<Vec<usize>> = (0..d)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut w = vec![1.0 / n as f64; n];
    let mut stumps = Vec::new();
    while stumps.len() < p.n_estimators {
        let (feature, threshold, polarity, eps) = best_stump(x, y, &w, &sorted);
        if eps >= 0.5 - PERFECT {
            break;
        }
        let perfect = eps < PERFECT;
        let e = eps.max(PERFECT);
        let alpha = p.learning_rate * 0.5 * ((1.0 - e) / e).ln();
        let stump = Stump {
            feature,
            threshold,
            polarity,
            alpha,
            error: if perfect { 0.0 } else { eps },
        };
        stumps.push(stump);
        if perfect {
            break;
        }
        let mut sum = 0.0;
        for (i, wi) in w.iter_mut().enumerate() {
            *wi *= (-alpha * y[i] * stump.predict(x.row(i))).exp();
            sum += *wi;
        }
        w.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(TrainedModel::AdaBoost(AdaBoostModel { stumps, width: d, seed }))
}
