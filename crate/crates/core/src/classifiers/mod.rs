//! Shallow binary classifiers with a canonical binary container.
//!
//! Labels are `-1.0` / `+1.0`. Every model exposes a real-valued score; the
//! predicted label is `+1` when the score reaches the kind's threshold (0 for
//! SVM and AdaBoost, 0.5 for logistic regression and random forest).

mod adaboost;
mod container;
mod forest;
mod logreg;
mod svm;
mod tree;

use std::fmt;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adaboost::{train_adaboost, AbParams, AdaBoostModel, Stump};
pub use container::{deserialize_model, model_size, serialize_model, Container, Section};
pub use forest::{train_rf, Criterion, ForestModel, RfParams};
pub(crate) use forest::mix;
pub use logreg::{train_logreg, train_logreg_traced, LogRegModel, LogRegParams, LogRegTrace, Penalty};
pub use svm::{train_svm, Kernel, KernelMatrix, SvmModel, SvmParams};
pub use tree::DecisionTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "LR")]
    LogReg,
    #[serde(rename = "RF")]
    Forest,
    #[serde(rename = "AB")]
    AdaBoost,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Svm,
        ClassifierKind::LogReg,
        ClassifierKind::Forest,
        ClassifierKind::AdaBoost,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::Svm => "SVM",
            ClassifierKind::LogReg => "LR",
            ClassifierKind::Forest => "RF",
            ClassifierKind::AdaBoost => "AB",
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            ClassifierKind::Svm | ClassifierKind::AdaBoost => 0.0,
            ClassifierKind::LogReg | ClassifierKind::Forest => 0.5,
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hyperparameters of any of the four kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ClassifierParams {
    #[serde(rename = "SVM")]
    Svm(SvmParams),
    #[serde(rename = "LR")]
    LogReg(LogRegParams),
    #[serde(rename = "RF")]
    Forest(RfParams),
    #[serde(rename = "AB")]
    AdaBoost(AbParams),
}

impl ClassifierParams {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierParams::Svm(_) => ClassifierKind::Svm,
            ClassifierParams::LogReg(_) => ClassifierKind::LogReg,
            ClassifierParams::Forest(_) => ClassifierKind::Forest,
            ClassifierParams::AdaBoost(_) => ClassifierKind::AdaBoost,
        }
    }

    pub fn train(&self, x: &Array2<f64>, y: &[f64], seed: u64) -> Result<TrainedModel> {
        match self {
            ClassifierParams::Svm(p) => train_svm(x, y, p, seed),
            ClassifierParams::LogReg(p) => train_logreg(x, y, p, seed),
            ClassifierParams::Forest(p) => train_rf(x, y, p, seed),
            ClassifierParams::AdaBoost(p) => train_adaboost(x, y, p, seed),
        }
    }
}

impl fmt::Display for ClassifierParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierParams::Svm(p) => match p.kernel {
                Kernel::Poly { degree } => write!(f, "SVM(C={}, kernel=poly, gamma={}, degree={degree})", p.c, p.gamma),
                k => write!(f, "SVM(C={}, kernel={}, gamma={})", p.c, k.name(), p.gamma),
            },
            ClassifierParams::LogReg(p) => write!(f, "LR(penalty={}, C={})", p.penalty.as_str(), p.c),
            ClassifierParams::Forest(p) => write!(
                f,
                "RF(n_estimators={}, min_samples_split={}, max_depth={}, criterion={})",
                p.n_estimators,
                p.min_samples_split,
                p.max_depth,
                p.criterion.as_str()
            ),
            ClassifierParams::AdaBoost(p) => {
                write!(f, "AB(n_estimators={}, learning_rate={})", p.n_estimators, p.learning_rate)
            }
        }
    }
}

/// A fitted model of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Svm(SvmModel),
    LogReg(LogRegModel),
    Forest(ForestModel),
    AdaBoost(AdaBoostModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedModel::Svm(_) => ClassifierKind::Svm,
            TrainedModel::LogReg(_) => ClassifierKind::LogReg,
            TrainedModel::Forest(_) => ClassifierKind::Forest,
            TrainedModel::AdaBoost(_) => ClassifierKind::AdaBoost,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            TrainedModel::Svm(m) => m.width,
            TrainedModel::LogReg(m) => m.weights.len(),
            TrainedModel::Forest(m) => m.width,
            TrainedModel::AdaBoost(m) => m.width,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            TrainedModel::Svm(m) => m.seed,
            TrainedModel::LogReg(m) => m.seed,
            TrainedModel::Forest(m) => m.seed,
            TrainedModel::AdaBoost(m) => m.seed,
        }
    }

    fn score_unchecked(&self, x: ArrayView1<f64>) -> f64 {
        match self {
            TrainedModel::Svm(m) => m.decision(x),
            TrainedModel::LogReg(m) => m.probability(x),
            TrainedModel::Forest(m) => m.vote_fraction(x),
            TrainedModel::AdaBoost(m) => m.weighted_vote(x),
        }
    }

    pub fn predict_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.width() {
            return Err(Error::invalid(format!(
                "model expects {} features, got {}",
                self.width(),
                x.len()
            )));
        }
        Ok(self.score_unchecked(ArrayView1::from(x)))
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<f64> {
        Ok(self.label_of(self.predict_score(x)?))
    }

    pub fn label_of(&self, score: f64) -> f64 {
        if score >= self.kind().threshold() {
            1.0
        } else {
            -1.0
        }
    }

    /// Scores for every row.
    pub fn predict_scores(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.width() {
            return Err(Error::invalid(format!(
                "model expects {} features, got {}",
                self.width(),
                x.ncols()
            )));
        }
        Ok(x.rows().into_iter().map(|r| self.score_unchecked(r)).collect())
    }
}

/// Shared input validation: matching lengths, finite values, both classes.
pub(crate) fn check_training_data(x: &Array2<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Training(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if x.ncols() == 0 {
        return Err(Error::Training("no features".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features".into()));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::Training(format!("labels must be -1 or +1, found {bad}")));
    }
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Training("training data contains a single class".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_logreg_scores_half_and_labels_positive() {
        let m = TrainedModel::LogReg(LogRegModel {
            weights: vec![0.0, 0.0],
            bias: 0.0,
            seed: 0,
            iterations: 0,
        });
        assert_eq!(m.predict_score(&[3.0, -1.0]).unwrap(), 0.5);
        assert_eq!(m.predict_label(&[3.0, -1.0]).unwrap(), 1.0);
        assert!(m.predict_score(&[1.0]).is_err());
    }

    #[test]
    fn single_class_and_bad_labels_rejected() {
        let x = array![[0.0], [1.0]];
        assert!(check_training_data(&x, &[1.0, 1.0]).is_err());
        assert!(check_training_data(&x, &[1.0, 0.0]).is_err());
        assert!(check_training_data(&x, &[1.0]).is_err());
        assert!(check_training_data(&array![[f64::NAN], [1.0]], &[1.0, -1.0]).is_err());
        assert!(check_training_data(&x, &[1.0, -1.0]).is_ok());
    }

    #[test]
    fn labels_follow_kind_thresholds() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.1, 0.0], [0.9, 1.0]];
        let y = [-1.0, 1.0, -1.0, 1.0];
        let params = [
            ClassifierParams::Svm(SvmParams {
                c: 1.0,
                kernel: Kernel::Rbf,
                gamma: 1.0,
            }),
            ClassifierParams::LogReg(LogRegParams {
                penalty: Penalty::L2,
                c: 1.0,
            }),
            ClassifierParams::Forest(RfParams {
                n_estimators: 5,
                min_samples_split: 2,
                max_depth: 3,
                criterion: Criterion::Gini,
            }),
            ClassifierParams::AdaBoost(AbParams {
                n_estimators: 5,
                learning_rate: 1.0,
            }),
        ];
        for p in params {
            let m = p.train(&x, &y, 1).unwrap();
            assert_eq!(m.kind(), p.kind());
            for row in x.rows() {
                let s = m.predict_score(row.as_slice().unwrap()).unwrap();
                let l = m.predict_label(row.as_slice().unwrap()).unwrap();
                assert_eq!(l, if s >= p.kind().threshold() { 1.0 } else { -1.0 });
            }
        }
    }
}
