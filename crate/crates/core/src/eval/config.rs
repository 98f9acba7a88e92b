use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::{AbParams, ClassifierKind, ClassifierParams, Criterion, Kernel, LogRegParams, Penalty, RfParams, SvmParams};
use crate::error::{Error, Result};
use crate::fusion::{FeatureSetId, FusionModality};

fn decades() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    Rbf,
    Poly,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmGrid {
    pub kernels: Vec<KernelName>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Swept for the poly kernel only.
    pub degrees: Vec<u32>,
}

impl Default for SvmGrid {
    fn default() -> Self {
        Self {
            kernels: vec![KernelName::Rbf, KernelName::Poly, KernelName::Sigmoid],
            c: decades(),
            gamma: vec![1e-3, 1e-2, 1e-1, 1.0, 10.0],
            degrees: vec![2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrGrid {
    pub penalties: Vec<Penalty>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
}

impl Default for LrGrid {
    fn default() -> Self {
        Self {
            penalties: vec![Penalty::L1, Penalty::L2],
            c: decades(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfGrid {
    pub n_estimators: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub criteria: Vec<Criterion>,
}

impl Default for RfGrid {
    fn default() -> Self {
        Self {
            n_estimators: vec![10, 20, 50, 100],
            min_samples_split: vec![2, 8, 10, 12],
            max_depth: vec![10, 30, 50],
            criteria: vec![Criterion::Entropy, Criterion::Gini],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbGrid {
    pub n_estimators: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

impl Default for AbGrid {
    fn default() -> Self {
        Self {
            n_estimators: vec![10, 20, 50, 100],
            learning_rate: vec![1.0, 0.5, 0.1, 0.05, 0.01, 0.001],
        }
    }
}

/// Whether class balancing happens on each side after the subject split
/// (default) or once on the whole pool before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BalanceOrder {
    AfterSplit,
    BeforeSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: String,
    pub modalities: Vec<FusionModality>,
    pub feature_sets: Vec<FeatureSetId>,
    pub pca: Vec<f64>,
    pub outer_shuffles: usize,
    pub dev_fraction: f64,
    pub inner_folds: usize,
    pub seed: u64,
    pub balance: BalanceOrder,
    pub classifiers: Vec<ClassifierKind>,
    pub svm: SvmGrid,
    pub logreg: LrGrid,
    pub forest: RfGrid,
    pub adaboost: AbGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: "unnamed".into(),
            modalities: vec![FusionModality::Cough],
            feature_sets: FeatureSetId::ALL.to_vec(),
            pca: vec![0.7, 0.8, 0.9, 0.95, 0.99],
            outer_shuffles: 10,
            dev_fraction: 0.8,
            inner_folds: 5,
            seed: 0,
            balance: BalanceOrder::AfterSplit,
            classifiers: ClassifierKind::ALL.to_vec(),
            svm: SvmGrid::default(),
            logreg: LrGrid::default(),
            forest: RfGrid::default(),
            adaboost: AbGrid::default(),
        }
    }
}

fn require<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    Ok(())
}

fn positive(name: &str, v: &[f64]) -> Result<()> {
    if let Some(bad) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::Config(format!("{name} values must be positive, found {bad}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return Err(Error::Config(format!("dev_fraction {} must lie in (0, 1)", self.dev_fraction)));
        }
        if self.inner_folds < 2 {
            return Err(Error::Config(format!("inner_folds must be at least 2, got {}", self.inner_folds)));
        }
        if self.outer_shuffles == 0 {
            return Err(Error::Config("outer_shuffles must be at least 1".into()));
        }
        require("modalities", &self.modalities)?;
        require("feature_sets", &self.feature_sets)?;
        require("pca", &self.pca)?;
        require("classifiers", &self.classifiers)?;
        if let Some(bad) = self.pca.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::Config(format!("pca coefficients must lie in (0, 1], found {bad}")));
        }
        for kind in &self.classifiers {
            match kind {
                ClassifierKind::Svm => {
                    let g = &self.svm;
                    require("svm.kernels", &g.kernels)?;
                    require("svm.C", &g.c)?;
                    require("svm.gamma", &g.gamma)?;
                    positive("svm.C", &g.c)?;
                    positive("svm.gamma", &g.gamma)?;
                    if g.kernels.contains(&KernelName::Poly) {
                        require("svm.degrees", &g.degrees)?;
                        if g.degrees.contains(&0) {
                            return Err(Error::Config("svm.degrees must be at least 1".into()));
                        }
                    }
                }
                ClassifierKind::LogReg => {
                    require("logreg.penalties", &self.logreg.penalties)?;
                    require("logreg.C", &self.logreg.c)?;
                    positive("logreg.C", &self.logreg.c)?;
                }
                ClassifierKind::Forest => {
                    let g = &self.forest;
                    require("forest.n_estimators", &g.n_estimators)?;
                    require("forest.min_samples_split", &g.min_samples_split)?;
                    require("forest.max_depth", &g.max_depth)?;
                    require("forest.criteria", &g.criteria)?;
                    if g.n_estimators.contains(&0) || g.max_depth.contains(&0) || g.min_samples_split.iter().any(|&m| m < 2) {
                        return Err(Error::Config(
                            "forest needs n_estimators, max_depth >= 1 and min_samples_split >= 2".into(),
                        ));
                    }
                }
                ClassifierKind::AdaBoost => {
                    require("adaboost.n_estimators", &self.adaboost.n_estimators)?;
                    require("adaboost.learning_rate", &self.adaboost.learning_rate)?;
                    positive("adaboost.learning_rate", &self.adaboost.learning_rate)?;
                    if self.adaboost.n_estimators.contains(&0) {
                        return Err(Error::Config("adaboost.n_estimators must be at least 1".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Every classifier setting, grouped so that settings sharing a kernel
    /// matrix or a growing ensemble sit next to each other.
    pub fn classifier_grid(&self) -> Vec<ClassifierParams> {
        let mut out = Vec::new();
        for kind in ClassifierKind::ALL {
            if !self.classifiers.contains(&kind) {
                continue;
            }
            match kind {
                ClassifierKind::Svm => {
                    for k in &self.svm.kernels {
                        let kernels: Vec<Kernel> = match k {
                            KernelName::Rbf => vec![Kernel::Rbf],
                            KernelName::Sigmoid => vec![Kernel::Sigmoid],
                            KernelName::Poly => self.svm.degrees.iter().map(|&degree| Kernel::Poly { degree }).collect(),
                        };
                        for kernel in kernels {
                            for &gamma in &self.svm.gamma {
                                for &c in &self.svm.c {
                                    out.push(ClassifierParams::Svm(SvmParams { c, kernel, gamma }));
                                }
                            }
                        }
                    }
                }
                ClassifierKind::LogReg => {
                    for &penalty in &self.logreg.penalties {
                        for &c in &self.logreg.c {
                            out.push(ClassifierParams::LogReg(LogRegParams { penalty, c }));
                        }
                    }
                }
                ClassifierKind::Forest => {
                    let g = &self.forest;
                    for &criterion in &g.criteria {
                        for &max_depth in &g.max_depth {
                            for &min_samples_split in &g.min_samples_split {
                                for &n_estimators in &g.n_estimators {
                                    out.push(ClassifierParams::Forest(RfParams {
                                        n_estimators,
                                        min_samples_split,
                                        max_depth,
                                        criterion,
                                    }));
                                }
                            }
                        }
                    }
                }
                ClassifierKind::AdaBoost => {
                    for &learning_rate in &self.adaboost.learning_rate {
                        for &n_estimators in &self.adaboost.n_estimators {
                            out.push(ClassifierParams::AdaBoost(AbParams {
                                n_estimators,
                                learning_rate,
                            }));
                        }
                    }
                }
            }
        }
        out
    }

    /// Candidates per (modality, feature set, pca) cell.
    pub fn grid_size(&self) -> usize {
        self.classifier_grid().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_every_setting() {
        let cfg = ExperimentConfig::default();
        let grid = cfg.classifier_grid();
        let count = |k: ClassifierKind| grid.iter().filter(|p| p.kind() == k).count();
        assert_eq!(count(ClassifierKind::Svm), 7 * 5 + 7 * 5 + 7 * 5 * 4);
        assert_eq!(count(ClassifierKind::LogReg), 14);
        assert_eq!(count(ClassifierKind::Forest), 96);
        assert_eq!(count(ClassifierKind::AdaBoost), 24);
        assert_eq!(grid.len(), 344);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_overrides_and_validation() {
        let cfg = ExperimentConfig::from_toml(
            "task = \"t\"\nseed = 3\nmodalities = [\"cough-breath\"]\nfeature_sets = [\"F1\", \"F3\"]\nclassifiers = [\"LR\"]\n[logreg]\nC = [1.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.modalities, vec![FusionModality::CoughBreath]);
        assert_eq!(cfg.classifier_grid().len(), 2);
        assert!(ExperimentConfig::from_toml("[logreg]\nC = []\n").is_err());
        assert!(ExperimentConfig::from_toml("inner_folds = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("dev_fraction = 1.0\n").is_err());
        assert!(ExperimentConfig::from_toml("pca = [1.5]\n").is_err());
        assert!(ExperimentConfig::from_toml("unknown = 1\n").is_err());
        // an empty grid of an unused kind is fine
        assert!(ExperimentConfig::from_toml("classifiers = [\"AB\"]\n[svm]\nC = []\n").is_ok());
    }
}
