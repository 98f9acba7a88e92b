use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use respira::dataset::{manifest_summary, parse_manifest, scan_coswara_layout, write_manifest, Manifest, StatusMap, TaskFilter};
use respira::eval::{
    footprint_report, run_experiment, write_footprint_csv, write_report_csv, write_report_json, EvaluationReport,
    ExperimentConfig,
};
use respira::store::{extract_features, ExtractOptions, FeatureStore, RunnerSpec};

const DATA_ROOT_VAR: &str = "RESPIRA_DATA_ROOT";

#[derive(Parser)]
#[command(name = "respira", version, about = "Respiratory-audio screening pipeline")]
struct Cli {
    /// Worker threads for extraction and grid search (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute acoustic features and/or aggregated embeddings for a manifest.
    Extract {
        manifest: PathBuf,
        out: PathBuf,
        #[arg(long)]
        acoustic: bool,
        #[arg(long)]
        embeddings: bool,
        /// stub[:<seed>] or sidecar:<dir>
        #[arg(long, default_value = "stub")]
        runner: String,
        /// Seed for the stub runner when none is given inline.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Recompute rows that already exist.
        #[arg(long)]
        force: bool,
    },
    /// Run the nested evaluation protocol.
    Evaluate {
        config: PathBuf,
        store: PathBuf,
        manifest: PathBuf,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Task definition applied to the manifest before evaluating.
        #[arg(long)]
        task: Option<PathBuf>,
    },
    /// Write the model size table of a finished evaluation.
    Footprint {
        report: PathBuf,
        /// Recompute from this feature store instead of copying the report's table.
        #[arg(long, requires = "manifest")]
        store: Option<PathBuf>,
        #[arg(long, requires = "store")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        task: Option<PathBuf>,
        #[arg(long, default_value = "footprint.csv")]
        out: PathBuf,
    },
    /// Recording counts per dataset and label.
    Summary {
        manifest: PathBuf,
        #[arg(long)]
        task: Option<PathBuf>,
    },
    /// Build a manifest from a COSWARA-style folder tree.
    ScanCoswara {
        root: PathBuf,
        #[arg(long, default_value = "manifest.csv")]
        out: PathBuf,
        /// Status-to-label mapping (default: the bundled one).
        #[arg(long)]
        status_map: Option<PathBuf>,
        /// JSON-lines report of skipped recordings.
        #[arg(long)]
        skipped: Option<PathBuf>,
    },
}

/// Failures that map to their own exit code.
#[derive(Debug, thiserror::Error)]
#[error("{failed} of {total} extraction steps failed")]
struct PartialExtraction {
    failed: usize,
    total: usize,
}

fn load_manifest(path: &Path, task: Option<&Path>) -> anyhow::Result<Manifest> {
    let manifest = parse_manifest(path).with_context(|| format!("reading manifest {}", path.display()))?;
    match task {
        Some(t) => {
            let filter = TaskFilter::load(t)?;
            let m = filter.apply(&manifest)?;
            log::info!("task {}: {} of {} recordings kept", filter.name, m.len(), manifest.len());
            Ok(m)
        }
        None => Ok(manifest),
    }
}

fn runner_spec(text: &str, seed: u64) -> anyhow::Result<RunnerSpec> {
    if text == "stub" {
        return Ok(RunnerSpec::Stub(seed));
    }
    Ok(text.parse()?)
}

fn data_root(manifest: &Path) -> PathBuf {
    match std::env::var_os(DATA_ROOT_VAR) {
        Some(root) => PathBuf::from(root),
        None => manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    }
}

fn csv_beside(path: &Path) -> PathBuf {
    path.with_extension("csv")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Extract {
            manifest,
            out,
            acoustic,
            embeddings,
            runner,
            seed,
            force,
        } => {
            let m = load_manifest(&manifest, None)?;
            let both = !acoustic && !embeddings;
            let opts = ExtractOptions {
                acoustic: acoustic || both,
                embeddings: embeddings || both,
                runner: runner_spec(&runner, seed)?,
                force,
                data_root: Some(data_root(&manifest)),
                ..ExtractOptions::default()
            };
            let summary = extract_features(&m, &out, &opts)?;
            println!(
                "acoustic rows written: {}, embedding rows written: {}, already present: {}",
                summary.acoustic_written, summary.embeddings_written, summary.skipped
            );
            if !summary.failures.is_empty() {
                for f in &summary.failures {
                    eprintln!("failed {} ({}): {}", f.sample_id, f.stage, f.reason);
                }
                let per_sample = usize::from(opts.acoustic) + usize::from(opts.embeddings);
                return Err(PartialExtraction {
                    failed: summary.failures.len(),
                    total: m.len() * per_sample,
                }
                .into());
            }
        }
        Command::Evaluate {
            config,
            store,
            manifest,
            out,
            seed,
            task,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let m = load_manifest(&manifest, task.as_deref())?;
            let features = FeatureStore::open(&store)?;
            let report = run_experiment(&cfg, &m, &features)?;
            write_report_json(&report, &out)?;
            write_report_csv(&report, &csv_beside(&out))?;
            print!("{}", report.summary_table());
        }
        Command::Footprint {
            report,
            store,
            manifest,
            task,
            out,
        } => {
            let text = std::fs::read_to_string(&report).with_context(|| format!("reading report {}", report.display()))?;
            let r: EvaluationReport = serde_json::from_str(&text).context("parsing report")?;
            let rows = match (store, manifest) {
                (Some(store), Some(manifest)) => {
                    let m = load_manifest(&manifest, task.as_deref())?;
                    footprint_report(
                        &r.config,
                        &m,
                        &FeatureStore::open(&store)?,
                        r.footprint_modality,
                        r.footprint_feature_set,
                    )?
                }
                _ => r.footprint.clone(),
            };
            write_footprint_csv(&rows, &out)?;
            println!("{:<4} {:>5} {:>10} {:>6}", "kind", "pca", "bytes", "auc");
            for row in &rows {
                println!("{:<4} {:>5} {:>10} {:>6.3}", row.classifier.as_str(), row.pca, row.bytes, row.auc);
            }
        }
        Command::Summary { manifest, task } => {
            let m = load_manifest(&manifest, task.as_deref())?;
            println!("{:<16} {:<8} {:>7}", "dataset", "label", "count");
            for row in manifest_summary(&m) {
                println!("{:<16} {:<8} {:>7}", row.dataset, row.label.as_str(), row.count);
            }
            println!("{} recordings, {} subjects", m.len(), m.subjects().len());
        }
        Command::ScanCoswara {
            root,
            out,
            status_map,
            skipped,
        } => {
            let map = match status_map {
                Some(p) => StatusMap::load(&p)?,
                None => StatusMap::default(),
            };
            let scan = scan_coswara_layout(&root, &map)?;
            write_manifest(&scan.manifest, &out)?;
            if let Some(p) = skipped {
                std::fs::write(&p, scan.skip_report_jsonl()).with_context(|| format!("writing {}", p.display()))?;
            }
            println!("{} recordings, {} skipped", scan.manifest.len(), scan.skipped.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool configured once");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<PartialExtraction>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
