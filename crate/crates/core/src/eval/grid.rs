use std::collections::HashMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    train_adaboost, train_rf, AbParams, ClassifierParams, KernelMatrix, RfParams, TrainedModel,
};
use crate::error::{Error, Result};
use crate::eval::config::ExperimentConfig;
use crate::eval::data::Dataset;
use crate::eval::metrics::auc;
use crate::eval::seeds;
use crate::eval::split::Fold;
use crate::fusion::{FeatureSetId, FusionModality, PcaModel, Standardizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub modality: FusionModality,
    pub feature_set: FeatureSetId,
    pub pca: f64,
    pub params: ClassifierParams,
}

/// Identity used to seed a candidate's model. Ensemble size is left out so
/// a smaller ensemble is a prefix of a larger one; forest depth is left out
/// so forests whose depth limit never binds coincide.
pub fn model_key(c: &Candidate) -> String {
    let params = match c.params {
        ClassifierParams::Forest(p) => ClassifierParams::Forest(RfParams {
            n_estimators: 0,
            max_depth: 0,
            ..p
        }),
        ClassifierParams::AdaBoost(p) => ClassifierParams::AdaBoost(AbParams { n_estimators: 0, ..p }),
        p => p,
    };
    format!("{}/{}/{}/{}", c.modality, c.feature_set, c.pca, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: Candidate,
    /// `None` for folds that were skipped or where the candidate failed.
    pub fold_auc: Vec<Option<f64>>,
    pub mean_auc: Option<f64>,
    /// PCA components summed over the scored folds.
    pub components: usize,
}

/// Dev-side rows of one (modality, feature set) dataset.
#[derive(Debug, Clone)]
pub struct GridInput<'a> {
    pub dataset: &'a Dataset,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub scores: Vec<CandidateScore>,
    pub best: usize,
}

impl GridResult {
    pub fn best(&self) -> &CandidateScore {
        &self.scores[self.best]
    }
}

/// Standardizer, PCA and classifier fitted on the same rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub standardizer: Standardizer,
    pub pca: PcaModel,
    pub model: TrainedModel,
}

impl Pipeline {
    pub fn fit(x: &Array2<f64>, y: &[f64], pca: f64, params: &ClassifierParams, seed: u64) -> Result<Self> {
        let standardizer = Standardizer::fit(x)?;
        let z = standardizer.transform(x)?;
        let pca = PcaModel::fit_full(&z)?.truncate(pca)?;
        let model = params.train(&pca.transform(&z)?, y, seed)?;
        Ok(Self {
            standardizer,
            pca,
            model,
        })
    }

    pub fn scores(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        self.model.predict_scores(&self.pca.transform(&self.standardizer.transform(x)?)?)
    }

    pub fn labels(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.model.label_of(s)).collect()
    }
}

fn both_classes(y: &[f64]) -> bool {
    y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)
}

/// Trains and scores every grid entry on one projected fold. Kernel
/// matrices are shared across C and each ensemble is grown once at its
/// largest size, then truncated.
fn score_grid(
    grid: &[ClassifierParams],
    xt: &Array2<f64>,
    yt: &[f64],
    xv: &Array2<f64>,
    yv: &[f64],
    seed_of: &dyn Fn(&ClassifierParams) -> u64,
) -> Vec<Option<f64>> {
    // ensembles are keyed without their size; forests also without depth
    let ensemble_key = |p: &ClassifierParams| match p {
        ClassifierParams::Forest(r) => Some(format!(
            "{}",
            ClassifierParams::Forest(RfParams {
                n_estimators: 0,
                max_depth: 0,
                ..*r
            })
        )),
        ClassifierParams::AdaBoost(a) => Some(format!("{}", ClassifierParams::AdaBoost(AbParams { n_estimators: 0, ..*a }))),
        _ => None,
    };
    let mut largest: HashMap<String, usize> = HashMap::new();
    for p in grid {
        if let (Some(k), ClassifierParams::Forest(RfParams { n_estimators: n, .. }) | ClassifierParams::AdaBoost(AbParams { n_estimators: n, .. })) = (ensemble_key(p), p) {
            let e = largest.entry(k).or_insert(0);
            *e = (*e).max(*n);
        }
    }

    let mut kernels: HashMap<String, KernelMatrix> = HashMap::new();
    let mut ensembles: HashMap<String, Option<TrainedModel>> = HashMap::new();
    let mut forests: HashMap<String, Vec<(usize, Option<TrainedModel>, usize)>> = HashMap::new();
    grid.iter()
        .map(|p| {
            let seed = seed_of(p);
            let model = match p {
                ClassifierParams::Svm(s) => {
                    let key = format!("{:?}/{}", s.kernel, s.gamma);
                    let km = kernels.entry(key).or_insert_with(|| KernelMatrix::new(xt, s.kernel, s.gamma));
                    km.fit(xt, yt, s.c, seed).map(TrainedModel::Svm).ok()
                }
                ClassifierParams::LogReg(_) => p.train(xt, yt, seed).ok(),
                ClassifierParams::Forest(r) => {
                    let key = ensemble_key(p).unwrap();
                    let grown = forests.entry(key.clone()).or_default();
                    // a forest whose own limit never bound equals any forest
                    // with a limit at least as deep as its deepest leaf
                    let reusable = grown.iter().position(|(limit, _, reached)| {
                        *limit == r.max_depth || (*reached < *limit && *reached <= r.max_depth)
                    });
                    let i = match reusable {
                        Some(i) => i,
                        None => {
                            let f = train_rf(xt, yt, &RfParams { n_estimators: largest[&key], ..*r }, seed).ok();
                            let reached = match &f {
                                Some(TrainedModel::Forest(f)) => f.trees.iter().map(|t| t.depth()).max().unwrap_or(0),
                                _ => usize::MAX,
                            };
                            grown.push((r.max_depth, f, reached));
                            grown.len() - 1
                        }
                    };
                    match &grown[i].1 {
                        Some(TrainedModel::Forest(f)) => Some(TrainedModel::Forest(f.truncated(r.n_estimators))),
                        _ => None,
                    }
                }
                ClassifierParams::AdaBoost(a) => {
                    let key = ensemble_key(p).unwrap();
                    let full = ensembles.entry(key.clone()).or_insert_with(|| {
                        train_adaboost(xt, yt, &AbParams { n_estimators: largest[&key], ..*a }, seed).ok()
                    });
                    match full {
                        Some(TrainedModel::AdaBoost(m)) => Some(TrainedModel::AdaBoost(m.truncated(a.n_estimators))),
                        _ => None,
                    }
                }
            };
            model.and_then(|m| m.predict_scores(xv).ok()).and_then(|s| auc(&s, yv).ok())
        })
        .collect()
}

/// Per-pca `(components, aucs)` for one input and fold; `None` when the
/// fold cannot be scored.
type FoldScores = Option<Vec<(usize, Vec<Option<f64>>)>>;

fn score_fold(
    input: &GridInput<'_>,
    fold: &Fold,
    fold_index: usize,
    config: &ExperimentConfig,
    grid: &[ClassifierParams],
    seed: u64,
) -> FoldScores {
    let ds = input.dataset;
    let side = |names: &std::collections::BTreeSet<String>| -> Vec<usize> {
        input.rows.iter().copied().filter(|&i| names.contains(&ds.units[i].subject)).collect()
    };
    let (xt, yt) = ds.rows(&side(&fold.train));
    let (xv, yv) = ds.rows(&side(&fold.validation));
    if !both_classes(&yt) || !both_classes(&yv) || yt.len() < 2 {
        log::debug!("fold {fold_index} of {}/{} skipped: one class on a side", ds.modality, ds.set);
        return None;
    }
    let standardizer = Standardizer::fit(&xt).ok()?;
    let zt = standardizer.transform(&xt).ok()?;
    let zv = standardizer.transform(&xv).ok()?;
    let full = PcaModel::fit_full(&zt).ok()?;
    let mut out = Vec::with_capacity(config.pca.len());
    for &target in &config.pca {
        let pca = full.truncate(target).ok()?;
        let pt = pca.transform(&zt).ok()?;
        let pv = pca.transform(&zv).ok()?;
        let seed_of = |p: &ClassifierParams| {
            let c = Candidate {
                modality: ds.modality,
                feature_set: ds.set,
                pca: target,
                params: *p,
            };
            seeds::derive(seed, seeds::MODEL, &[fold_index as u64, seeds::hash_str(&model_key(&c))])
        };
        out.push((pca.n_components(), score_grid(grid, &pt, &yt, &pv, &yv, &seed_of)));
    }
    Some(out)
}

/// Exhaustive search over (input, pca, classifier setting), scored by mean
/// validation AUC across subject folds. Ties go to fewer PCA components,
/// then to enumeration order.
pub fn grid_search(config: &ExperimentConfig, inputs: &[GridInput<'_>], folds: &[Fold], seed: u64) -> Result<GridResult> {
    let grid = config.classifier_grid();
    if grid.is_empty() || inputs.is_empty() {
        return Err(Error::Evaluation("empty grid".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..inputs.len()).flat_map(|i| (0..folds.len()).map(move |f| (i, f))).collect();
    let results: Vec<FoldScores> = jobs
        .par_iter()
        .map(|&(i, f)| score_fold(&inputs[i], &folds[f], f, config, &grid, seed))
        .collect();

    let mut scores = Vec::with_capacity(inputs.len() * config.pca.len() * grid.len());
    for (i, input) in inputs.iter().enumerate() {
        let per_fold = &results[i * folds.len()..(i + 1) * folds.len()];
        for (j, &pca) in config.pca.iter().enumerate() {
            for (g, params) in grid.iter().enumerate() {
                let fold_auc: Vec<Option<f64>> = per_fold.iter().map(|r| r.as_ref().and_then(|r| r[j].1[g])).collect();
                let scored: Vec<&(usize, Vec<Option<f64>>)> = per_fold.iter().filter_map(|r| r.as_ref().map(|r| &r[j])).collect();
                let complete = !scored.is_empty() && scored.iter().all(|s| s.1[g].is_some());
                let mean_auc = complete.then(|| scored.iter().map(|s| s.1[g].unwrap()).sum::<f64>() / scored.len() as f64);
                scores.push(CandidateScore {
                    candidate: Candidate {
                        modality: input.dataset.modality,
                        feature_set: input.dataset.set,
                        pca,
                        params: *params,
                    },
                    fold_auc,
                    mean_auc,
                    components: scored.iter().map(|s| s.0).sum(),
                });
            }
        }
    }
    let best = best_index(&scores, |_| true).ok_or_else(|| Error::Evaluation("every grid candidate failed".into()))?;
    Ok(GridResult { scores, best })
}

/// Highest mean AUC among the candidates accepted by `keep`, with the
/// search's tie-breaking.
pub(crate) fn best_index(scores: &[CandidateScore], keep: impl Fn(&CandidateScore) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        let Some(a) = s.mean_auc else { continue };
        if !keep(s) {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let (ba, bc) = (scores[b].mean_auc.unwrap(), scores[b].components);
                a > ba || (a == ba && s.components < bc)
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{ClassifierKind, LogRegParams, Penalty};
    use crate::dataset::Label;
    use crate::eval::data::Unit;
    use crate::eval::split::kfold_by_subject;
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeMap;

    /// 20 subjects, two units each; only `signal_col` separates the classes.
    fn dataset(set: FeatureSetId, width: usize, signal_col: Option<usize>, seed: u64) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut units = Vec::new();
        for s in 0..20 {
            for k in 0..2 {
                units.push(Unit {
                    id: format!("s{s:02}_{k}"),
                    subject: format!("s{s:02}"),
                    label: if s % 2 == 0 { Label::Covid } else { Label::Healthy },
                    samples: vec![format!("s{s:02}_{k}")],
                });
            }
        }
        let y: Vec<f64> = units.iter().map(|u| u.label.sign()).collect();
        let x = Array2::from_shape_fn((units.len(), width), |(i, j)| {
            let noise: f64 = rng.gen_range(-1.0..1.0);
            if Some(j) == signal_col {
                3.0 * y[i] + 0.1 * noise
            } else {
                noise
            }
        });
        Dataset {
            modality: FusionModality::Cough,
            set,
            units,
            x,
            y,
        }
    }

    fn folds(ds: &Dataset) -> Vec<Fold> {
        let subjects: BTreeMap<String, Label> = ds.units.iter().map(|u| (u.subject.clone(), u.label)).collect();
        kfold_by_subject(&subjects, 5, 1).unwrap()
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            pca: vec![0.9],
            classifiers: vec![ClassifierKind::LogReg],
            logreg: crate::eval::config::LrGrid {
                penalties: vec![Penalty::L2],
                c: vec![1.0],
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn single_candidate_is_returned() {
        let ds = dataset(FeatureSetId::F1, 6, Some(0), 1);
        let input = GridInput {
            dataset: &ds,
            rows: (0..ds.units.len()).collect(),
        };
        let r = grid_search(&small_config(), &[input], &folds(&ds), 5).unwrap();
        assert_eq!(r.scores.len(), 1);
        assert_eq!(r.best, 0);
        assert_eq!(
            r.best().candidate.params,
            ClassifierParams::LogReg(LogRegParams {
                penalty: Penalty::L2,
                c: 1.0
            })
        );
        assert!(r.best().mean_auc.unwrap() > 0.9);
    }

    #[test]
    fn informative_feature_set_wins() {
        let noise = dataset(FeatureSetId::F1, 6, None, 2);
        let signal = dataset(FeatureSetId::F4, 9, Some(7), 2);
        let inputs = [
            GridInput {
                dataset: &noise,
                rows: (0..40).collect(),
            },
            GridInput {
                dataset: &signal,
                rows: (0..40).collect(),
            },
        ];
        let r = grid_search(&small_config(), &inputs, &folds(&noise), 5).unwrap();
        assert_eq!(r.best().candidate.feature_set, FeatureSetId::F4);
    }

    #[test]
    fn ensembles_match_direct_training() {
        let ds = dataset(FeatureSetId::F1, 4, Some(1), 3);
        let (x, y) = ds.rows(&(0..30).collect::<Vec<_>>());
        let (xv, yv) = ds.rows(&(30..40).collect::<Vec<_>>());
        let grid: Vec<ClassifierParams> = [(5, 2), (20, 40), (20, 2), (5, 3), (20, 8), (20, 40)]
            .iter()
            .map(|&(n, max_depth)| {
                ClassifierParams::Forest(RfParams {
                    n_estimators: n,
                    min_samples_split: 2,
                    max_depth,
                    criterion: crate::classifiers::Criterion::Gini,
                })
            })
            .chain([3, 9].iter().map(|&n| {
                ClassifierParams::AdaBoost(AbParams {
                    n_estimators: n,
                    learning_rate: 0.5,
                })
            }))
            .collect();
        let got = score_grid(&grid, &x, &y, &xv, &yv, &|_| 11);
        for (p, g) in grid.iter().zip(got) {
            let m = p.train(&x, &y, 11).unwrap();
            assert_eq!(g, auc(&m.predict_scores(&xv).unwrap(), &yv).ok());
        }
    }

    #[test]
    fn ties_prefer_fewer_components() {
        let mk = |auc: f64, components: usize| CandidateScore {
            candidate: Candidate {
                modality: FusionModality::Cough,
                feature_set: FeatureSetId::F1,
                pca: 0.9,
                params: ClassifierParams::LogReg(LogRegParams {
                    penalty: Penalty::L1,
                    c: 1.0,
                }),
            },
            fold_auc: vec![],
            mean_auc: Some(auc),
            components,
        };
        let scores = vec![mk(0.8, 5), mk(0.9, 9), mk(0.9, 4), mk(0.9, 4)];
        assert_eq!(best_index(&scores, |_| true), Some(2));
    }
}
