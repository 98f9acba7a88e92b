use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::{model_size, ClassifierKind, ClassifierParams};
use crate::dataset::{Label, Manifest};
use crate::error::{Error, Result};
use crate::eval::config::{BalanceOrder, ExperimentConfig};
use crate::eval::data::{assemble_dataset, Dataset};
use crate::eval::grid::{best_index, grid_search, model_key, Candidate, GridInput, GridResult, Pipeline};
use crate::eval::metrics::{metric_set, MetricSet};
use crate::eval::seeds;
use crate::eval::split::{check_disjoint, kfold_by_subject, subject_labels, subject_split, undersample_balance, Fold};
use crate::fusion::{FeatureSetId, FusionModality};
use crate::store::FeatureStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestConfig {
    pub candidate: Candidate,
    pub inner_auc: f64,
    /// Components of the PCA refitted on the whole dev side.
    pub n_components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub split: usize,
    pub dev_subjects: usize,
    pub test_subjects: usize,
    /// `[healthy, covid]` units after balancing.
    pub dev_counts: [usize; 2],
    pub test_counts: [usize; 2],
    pub best: BestConfig,
    pub test: MetricSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub auc: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintRow {
    pub classifier: ClassifierKind,
    pub pca: f64,
    pub bytes: usize,
    pub auc: f64,
    pub params: ClassifierParams,
    pub inner_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ExperimentConfig,
    pub subjects: usize,
    pub candidates_per_split: usize,
    pub splits: Vec<SplitReport>,
    pub aggregate: Aggregate,
    /// Modality and feature set the size table was tuned on (first split's
    /// winner).
    pub footprint_modality: FusionModality,
    pub footprint_feature_set: FeatureSetId,
    pub footprint: Vec<FootprintRow>,
    /// Subject-disjointness checks performed; any violation aborts the run.
    pub leakage_checks: usize,
}

impl EvaluationReport {
    /// Mean (std) lines in the shape of a results table.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let a = &self.aggregate;
        let _ = writeln!(out, "task: {}  ({} outer splits)", self.config.task, self.splits.len());
        let _ = writeln!(out, "{:<10} {:>8} {:>8}", "metric", "mean", "std");
        for (name, m) in [("AUC", a.auc), ("precision", a.precision), ("recall", a.recall)] {
            let _ = writeln!(out, "{name:<10} {:>8.3} {:>8.3}", m.mean, m.std);
        }
        let mut picks: BTreeMap<String, usize> = BTreeMap::new();
        for s in &self.splits {
            let c = &s.best.candidate;
            *picks
                .entry(format!("{} {} pca={} {}", c.modality, c.feature_set, c.pca, c.params.kind()))
                .or_default() += 1;
        }
        let _ = writeln!(out, "chosen pipelines:");
        for (k, n) in picks {
            let _ = writeln!(out, "  {n:>2} x {k}");
        }
        out
    }
}

/// Per-split partition shared by the experiment and the size table.
struct SplitPlan {
    dev_subjects: usize,
    test_subjects: usize,
    /// Per modality, balanced unit indices.
    dev_rows: Vec<Vec<usize>>,
    test_rows: Vec<Vec<usize>>,
    folds: Vec<Fold>,
    checks: usize,
}

fn modality_key(m: FusionModality) -> u64 {
    seeds::hash_str(m.as_str())
}

fn count_labels(ds: &Dataset, rows: &[usize]) -> [usize; 2] {
    let pos = rows.iter().filter(|&&i| ds.y[i] > 0.0).count();
    [rows.len() - pos, pos]
}

fn plan_split(
    config: &ExperimentConfig,
    subjects: &BTreeMap<String, Label>,
    per_modality: &[&Dataset],
    s: usize,
) -> Result<SplitPlan> {
    let master = config.seed;
    let split = subject_split(subjects, seeds::derive(master, seeds::SPLIT, &[s as u64]), config.dev_fraction)?;
    let mut violations = check_disjoint(split.dev.iter().map(String::as_str), split.test.iter().map(String::as_str));
    let mut checks = 1;

    let mut dev_rows = Vec::new();
    let mut test_rows = Vec::new();
    for ds in per_modality {
        let mk = modality_key(ds.modality);
        let on = |side: &std::collections::BTreeSet<String>, pool: &[usize]| -> Vec<usize> {
            pool.iter().copied().filter(|&i| side.contains(&ds.units[i].subject)).collect()
        };
        let balance = |pool: Vec<usize>, stage: u64| -> Result<Vec<usize>> {
            let labels: Vec<Label> = pool.iter().map(|&i| ds.units[i].label).collect();
            let keep = undersample_balance(&labels, seeds::derive(master, stage, &[s as u64, mk]))
                .map_err(|e| Error::Evaluation(format!("{} split {s}: {e}", ds.modality)))?;
            Ok(keep.into_iter().map(|k| pool[k]).collect())
        };
        let all: Vec<usize> = (0..ds.units.len()).collect();
        let (dev, test) = match config.balance {
            BalanceOrder::AfterSplit => (
                balance(on(&split.dev, &all), seeds::BALANCE_DEV)?,
                balance(on(&split.test, &all), seeds::BALANCE_TEST)?,
            ),
            BalanceOrder::BeforeSplit => {
                let pool = balance(all, seeds::BALANCE_ALL)?;
                (on(&split.dev, &pool), on(&split.test, &pool))
            }
        };
        violations += check_disjoint(
            dev.iter().map(|&i| ds.units[i].subject.as_str()),
            test.iter().map(|&i| ds.units[i].subject.as_str()),
        );
        checks += 1;
        dev_rows.push(dev);
        test_rows.push(test);
    }

    let dev_subjects: BTreeMap<String, Label> = subjects
        .iter()
        .filter(|(k, _)| split.dev.contains(*k))
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    let folds = kfold_by_subject(&dev_subjects, config.inner_folds, seeds::derive(master, seeds::FOLDS, &[s as u64]))?;
    for f in &folds {
        violations += check_disjoint(f.train.iter().map(String::as_str), f.validation.iter().map(String::as_str));
        violations += check_disjoint(f.validation.iter().map(String::as_str), split.test.iter().map(String::as_str));
        checks += 2;
    }
    if violations > 0 {
        return Err(Error::Evaluation(format!("split {s}: {violations} subjects leak across sides")));
    }
    Ok(SplitPlan {
        dev_subjects: split.dev.len(),
        test_subjects: split.test.len(),
        dev_rows,
        test_rows,
        folds,
        checks,
    })
}

struct Prepared {
    subjects: BTreeMap<String, Label>,
    /// Config order: modality-major, then feature set.
    datasets: Vec<Dataset>,
}

impl Prepared {
    fn new(config: &ExperimentConfig, manifest: &Manifest, store: &FeatureStore) -> Result<Self> {
        config.validate()?;
        let subjects = subject_labels(manifest)?;
        let mut datasets = Vec::new();
        for &m in &config.modalities {
            for &set in &config.feature_sets {
                datasets.push(assemble_dataset(manifest, store, m, set)?);
            }
        }
        Ok(Self { subjects, datasets })
    }

    fn first_per_modality(&self, config: &ExperimentConfig) -> Vec<&Dataset> {
        self.datasets.iter().step_by(config.feature_sets.len()).collect()
    }

    fn modality_index(&self, config: &ExperimentConfig, m: FusionModality) -> usize {
        config.modalities.iter().position(|x| *x == m).unwrap()
    }

    fn dataset(&self, m: FusionModality, set: FeatureSetId) -> &Dataset {
        self.datasets.iter().find(|d| d.modality == m && d.set == set).unwrap()
    }
}

fn refit(
    config: &ExperimentConfig,
    ds: &Dataset,
    plan: &SplitPlan,
    mi: usize,
    candidate: &Candidate,
    s: usize,
) -> Result<(Pipeline, MetricSet)> {
    let (xd, yd) = ds.rows(&plan.dev_rows[mi]);
    let (xt, yt) = ds.rows(&plan.test_rows[mi]);
    let seed = seeds::derive(config.seed, seeds::REFIT, &[s as u64, seeds::hash_str(&model_key(candidate))]);
    let pipe = Pipeline::fit(&xd, &yd, candidate.pca, &candidate.params, seed)?;
    let scores = pipe.scores(&xt)?;
    let preds = pipe.labels(&scores);
    let metrics = metric_set(&scores, &preds, &yt)?;
    Ok((pipe, metrics))
}

fn footprint_from(
    config: &ExperimentConfig,
    prep: &Prepared,
    plan: &SplitPlan,
    grid: &GridResult,
    modality: FusionModality,
    set: FeatureSetId,
) -> Result<Vec<FootprintRow>> {
    let ds = prep.dataset(modality, set);
    let mi = prep.modality_index(config, modality);
    let mut rows = Vec::new();
    for kind in ClassifierKind::ALL {
        if !config.classifiers.contains(&kind) {
            continue;
        }
        for &pca in &config.pca {
            let Some(i) = best_index(&grid.scores, |c| {
                let k = &c.candidate;
                k.modality == modality && k.feature_set == set && k.pca == pca && k.params.kind() == kind
            }) else {
                log::warn!("no working {kind} candidate at pca {pca}; row omitted");
                continue;
            };
            let best = &grid.scores[i];
            let (pipe, metrics) = refit(config, ds, plan, mi, &best.candidate, 0)?;
            rows.push(FootprintRow {
                classifier: kind,
                pca,
                bytes: model_size(&pipe.model),
                auc: metrics.auc,
                params: best.candidate.params,
                inner_auc: best.mean_auc.unwrap(),
            });
        }
    }
    Ok(rows)
}

fn inputs_for<'a>(prep: &'a Prepared, config: &ExperimentConfig, plan: &SplitPlan) -> Vec<GridInput<'a>> {
    prep.datasets
        .iter()
        .map(|d| GridInput {
            dataset: d,
            rows: plan.dev_rows[prep.modality_index(config, d.modality)].clone(),
        })
        .collect()
}

/// The full protocol: `outer_shuffles` subject splits, balancing, inner
/// grid search on the dev side, refit, test metrics, and the size table
/// from the first split.
pub fn run_experiment(config: &ExperimentConfig, manifest: &Manifest, store: &FeatureStore) -> Result<EvaluationReport> {
    let prep = Prepared::new(config, manifest, store)?;
    let per_modality = prep.first_per_modality(config);
    let mut splits = Vec::with_capacity(config.outer_shuffles);
    let mut footprint = None;
    let mut checks = 0;
    for s in 0..config.outer_shuffles {
        let plan = plan_split(config, &prep.subjects, &per_modality, s)?;
        checks += plan.checks;
        let grid = grid_search(
            config,
            &inputs_for(&prep, config, &plan),
            &plan.folds,
            seeds::derive(config.seed, seeds::MODEL, &[s as u64]),
        )?;
        let best = grid.best().clone();
        let c = &best.candidate;
        let ds = prep.dataset(c.modality, c.feature_set);
        let mi = prep.modality_index(config, c.modality);
        let (pipe, test) = refit(config, ds, &plan, mi, c, s)?;
        log::info!(
            "split {s}: {} {} pca={} {} inner AUC {:.3}, test AUC {:.3}",
            c.modality,
            c.feature_set,
            c.pca,
            c.params,
            best.mean_auc.unwrap(),
            test.auc
        );
        if s == 0 {
            footprint = Some((c.modality, c.feature_set, footprint_from(config, &prep, &plan, &grid, c.modality, c.feature_set)?));
        }
        splits.push(SplitReport {
            split: s,
            dev_subjects: plan.dev_subjects,
            test_subjects: plan.test_subjects,
            dev_counts: count_labels(ds, &plan.dev_rows[mi]),
            test_counts: count_labels(ds, &plan.test_rows[mi]),
            best: BestConfig {
                candidate: c.clone(),
                inner_auc: best.mean_auc.unwrap(),
                n_components: pipe.pca.n_components(),
            },
            test,
        });
    }
    let col = |f: fn(&MetricSet) -> f64| MeanStd::of(&splits.iter().map(|s| f(&s.test)).collect::<Vec<_>>());
    let aggregate = Aggregate {
        auc: col(|m| m.auc),
        precision: col(|m| m.precision),
        recall: col(|m| m.recall),
    };
    let (footprint_modality, footprint_feature_set, footprint) = footprint.unwrap();
    Ok(EvaluationReport {
        config: config.clone(),
        subjects: prep.subjects.len(),
        candidates_per_split: prep.datasets.len() * config.pca.len() * config.grid_size(),
        splits,
        aggregate,
        footprint_modality,
        footprint_feature_set,
        footprint,
        leakage_checks: checks,
    })
}

/// Rebuilds the size table for one modality and feature set on the first
/// outer split. Matches the table inside a report produced with the same
/// config.
pub fn footprint_report(
    config: &ExperimentConfig,
    manifest: &Manifest,
    store: &FeatureStore,
    modality: FusionModality,
    set: FeatureSetId,
) -> Result<Vec<FootprintRow>> {
    // the split plan depends on every swept modality, so keep them all and
    // restrict only the searched inputs
    let prep = Prepared::new(config, manifest, store)?;
    let plan = plan_split(config, &prep.subjects, &prep.first_per_modality(config), 0)?;
    let ds = prep.dataset(modality, set);
    let input = GridInput {
        dataset: ds,
        rows: plan.dev_rows[prep.modality_index(config, modality)].clone(),
    };
    let grid = grid_search(config, &[input], &plan.folds, seeds::derive(config.seed, seeds::MODEL, &[0]))?;
    footprint_from(config, &prep, &plan, &grid, modality, set)
}

pub fn write_report_json(report: &EvaluationReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Evaluation(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_report_csv(report: &EvaluationReport, path: &Path) -> Result<()> {
    let fail = |e: csv::Error| Error::Evaluation(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record([
        "split",
        "modality",
        "feature_set",
        "pca",
        "classifier",
        "params",
        "inner_auc",
        "n_components",
        "test_auc",
        "precision",
        "recall",
        "precision_degenerate",
    ])
    .map_err(fail)?;
    for s in &report.splits {
        let c = &s.best.candidate;
        w.write_record([
            s.split.to_string(),
            c.modality.to_string(),
            c.feature_set.to_string(),
            c.pca.to_string(),
            c.params.kind().to_string(),
            c.params.to_string(),
            s.best.inner_auc.to_string(),
            s.best.n_components.to_string(),
            s.test.auc.to_string(),
            s.test.precision.to_string(),
            s.test.recall.to_string(),
            s.test.precision_degenerate.to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_footprint_csv(rows: &[FootprintRow], path: &Path) -> Result<()> {
    let fail = |e: csv::Error| Error::Evaluation(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record(["classifier", "pca", "bytes", "auc"]).map_err(fail)?;
    for r in rows {
        w.write_record([r.classifier.to_string(), r.pca.to_string(), r.bytes.to_string(), r.auc.to_string()])
            .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Modality, SampleRecord};
    use crate::embeddings::{AggregatedEmbedding, AGGREGATED_DIM};
    use crate::eval::config::LrGrid;
    use crate::classifiers::Penalty;
    use rand::{Rng, SeedableRng};

    /// 24 subjects x 2 cough recordings; the first 200 embedding columns
    /// carry the label when `separable`.
    fn corpus(separable: bool) -> (Manifest, FeatureStore) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut records = Vec::new();
        let mut store = FeatureStore::default();
        for s in 0..24 {
            let label = if s < 10 { Label::Covid } else { Label::Healthy };
            for k in 0..2 {
                let id = format!("s{s:02}_{k}");
                records.push(SampleRecord {
                    sample_id: id.clone(),
                    subject_id: format!("s{s:02}"),
                    session_id: "1".into(),
                    label,
                    modality: Modality::Cough,
                    path: "x.wav".into(),
                    dataset: "synthetic".into(),
                    metadata: Default::default(),
                });
                let mut values: Vec<f64> = (0..AGGREGATED_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if separable {
                    values.iter_mut().take(200).for_each(|v| *v += 3.0 * label.sign());
                }
                store.embeddings.insert(id, AggregatedEmbedding { values });
            }
        }
        (Manifest::new(records).unwrap(), store)
    }

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            task: "unit".into(),
            feature_sets: vec![FeatureSetId::F1],
            pca: vec![0.5, 0.9],
            outer_shuffles: 3,
            seed: 17,
            classifiers: vec![ClassifierKind::LogReg],
            logreg: LrGrid {
                penalties: vec![Penalty::L2],
                c: vec![0.1, 10.0],
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn separable_corpus_reaches_the_ceiling() {
        let (m, store) = corpus(true);
        let r = run_experiment(&config(), &m, &store).unwrap();
        assert_eq!(r.splits.len(), 3);
        assert_eq!(r.aggregate.auc.mean, 1.0);
        assert_eq!(r.aggregate.auc.std, 0.0);
        for s in &r.splits {
            assert_eq!(s.dev_counts[0], s.dev_counts[1]);
            assert_eq!(s.test_counts[0], s.test_counts[1]);
        }
        assert_eq!(r.footprint.len(), 2);
        assert!(r.splits.iter().all(|s| s.test.auc == 1.0));
    }

    #[test]
    fn same_seed_same_bytes_and_standalone_footprint_agrees() {
        let (m, store) = corpus(false);
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        let r = run_experiment(&config(), &m, &store).unwrap();
        write_report_json(&r, &a).unwrap();
        write_report_json(&run_experiment(&config(), &m, &store).unwrap(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let back: EvaluationReport = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
        assert_eq!(back, r);
        let fp = footprint_report(&config(), &m, &store, r.footprint_modality, r.footprint_feature_set).unwrap();
        assert_eq!(fp, r.footprint);

        let csv = dir.path().join("fp.csv");
        write_footprint_csv(&fp, &csv).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("classifier,pca,bytes,auc\n"));
        write_report_csv(&r, &dir.path().join("r.csv")).unwrap();
    }

    #[test]
    fn too_few_subjects_for_folds() {
        let (m, store) = corpus(true);
        let cfg = ExperimentConfig {
            inner_folds: 30,
            ..config()
        };
        assert!(run_experiment(&cfg, &m, &store).is_err());
    }
}
