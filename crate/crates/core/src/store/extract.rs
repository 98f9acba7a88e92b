use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audio::{load_wav, resample};
use crate::dataset::{Manifest, SampleRecord};
use crate::embeddings::{
    aggregate_embeddings, find_sidecar, load_precomputed, AggregatedEmbedding, EmbeddingConfig, EmbeddingRunner,
    StubRunner, WindowEmbedder,
};
use crate::error::{Error, Result};
use crate::features::{acoustic_feature_vector, prepare_clip, AcousticConfig, AcousticFeatureVector};
use crate::store::FeatureStore;

/// Where embeddings come from.
#[derive(Debug, Clone, PartialEq)]
pub enum RunnerSpec {
    /// Seeded stand-in network.
    Stub(u64),
    /// Precomputed `.l3emb` / `.l3emb.csv` files named by sample id.
    Sidecar(PathBuf),
}

impl std::str::FromStr for RunnerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("stub", seed)) => seed
                .parse()
                .map(RunnerSpec::Stub)
                .map_err(|_| Error::invalid(format!("bad stub seed {seed:?}"))),
            Some(("sidecar", dir)) if !dir.is_empty() => Ok(RunnerSpec::Sidecar(PathBuf::from(dir))),
            _ => Err(Error::invalid(format!("runner must be stub:<seed> or sidecar:<dir>, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub acoustic: bool,
    pub embeddings: bool,
    pub runner: RunnerSpec,
    /// Recompute rows that are already stored.
    pub force: bool,
    /// Prefix for relative manifest paths.
    pub data_root: Option<PathBuf>,
    pub acoustic_config: AcousticConfig,
    pub embedding_config: EmbeddingConfig,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            acoustic: true,
            embeddings: true,
            runner: RunnerSpec::Stub(0),
            force: false,
            data_root: None,
            acoustic_config: AcousticConfig::default(),
            embedding_config: EmbeddingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractFailure {
    pub sample_id: String,
    pub stage: &'static str,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractSummary {
    pub acoustic_written: usize,
    pub embeddings_written: usize,
    /// Rows already present and left alone.
    pub skipped: usize,
    pub failures: Vec<ExtractFailure>,
}

struct Outcome {
    id: String,
    acoustic: Option<std::result::Result<AcousticFeatureVector, String>>,
    embedding: Option<std::result::Result<AggregatedEmbedding, String>>,
}

struct Extractor<'a> {
    opts: &'a ExtractOptions,
    embedder: WindowEmbedder,
    stub: Option<StubRunner>,
}

impl Extractor<'_> {
    fn acoustic(&self, record: &SampleRecord) -> Result<AcousticFeatureVector> {
        let clip = load_wav(record.resolve_path(self.opts.data_root.as_deref()))?;
        let clip = prepare_clip(&clip, &self.opts.acoustic_config)?;
        acoustic_feature_vector(&clip, &self.opts.acoustic_config)
    }

    fn embedding(&self, record: &SampleRecord) -> Result<AggregatedEmbedding> {
        let matrix = match (&self.opts.runner, &self.stub) {
            (RunnerSpec::Sidecar(dir), _) => {
                let path = find_sidecar(dir, &record.sample_id).ok_or_else(|| Error::Sidecar {
                    path: dir.join(format!("{}.l3emb", record.sample_id)),
                    reason: "no sidecar file".into(),
                })?;
                load_precomputed(&path)?
            }
            (RunnerSpec::Stub(_), Some(stub)) => {
                let clip = load_wav(record.resolve_path(self.opts.data_root.as_deref()))?;
                let clip = resample(&clip, self.embedder.config().sample_rate)?;
                self.embedder
                    .embed_windows(&record.sample_id, &clip, stub as &dyn EmbeddingRunner)?
            }
            (RunnerSpec::Stub(_), None) => unreachable!(),
        };
        aggregate_embeddings(&matrix)
    }
}

/// Computes missing rows for every manifest sample and appends them to the
/// store in `dir`. Samples run in parallel on the current rayon pool; rows
/// are written in manifest order a batch at a time, so an interrupted run
/// keeps what it finished. Per-sample failures are collected, not fatal.
pub fn extract_features(manifest: &Manifest, dir: &Path, opts: &ExtractOptions) -> Result<ExtractSummary> {
    if !opts.acoustic && !opts.embeddings {
        return Err(Error::invalid("nothing to extract: enable acoustic and/or embeddings"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut store = FeatureStore::open(dir)?;
    if opts.force {
        for r in &manifest.records {
            if opts.acoustic {
                store.acoustic.remove(&r.sample_id);
            }
            if opts.embeddings {
                store.embeddings.remove(&r.sample_id);
            }
        }
        store.save(dir)?;
    }

    let extractor = Extractor {
        opts,
        embedder: WindowEmbedder::new(opts.embedding_config)?,
        stub: match opts.runner {
            RunnerSpec::Stub(seed) => Some(StubRunner::new(seed)),
            RunnerSpec::Sidecar(_) => None,
        },
    };

    let mut summary = ExtractSummary::default();
    let mut pending = Vec::new();
    for r in &manifest.records {
        let need_a = opts.acoustic && !store.acoustic.contains_key(&r.sample_id);
        let need_e = opts.embeddings && !store.embeddings.contains_key(&r.sample_id);
        summary.skipped += usize::from(opts.acoustic && !need_a) + usize::from(opts.embeddings && !need_e);
        if need_a || need_e {
            pending.push((r, need_a, need_e));
        }
    }

    let batch = 8 * rayon::current_num_threads();
    for chunk in pending.chunks(batch) {
        let outcomes: Vec<Outcome> = chunk
            .par_iter()
            .map(|&(r, need_a, need_e)| Outcome {
                id: r.sample_id.clone(),
                acoustic: need_a.then(|| extractor.acoustic(r).map_err(|e| e.to_string())),
                embedding: need_e.then(|| extractor.embedding(r).map_err(|e| e.to_string())),
            })
            .collect();
        for o in outcomes {
            match o.acoustic {
                Some(Ok(v)) => {
                    store.add_acoustic(dir, &o.id, v)?;
                    summary.acoustic_written += 1;
                }
                Some(Err(reason)) => summary.failures.push(ExtractFailure {
                    sample_id: o.id.clone(),
                    stage: "acoustic",
                    reason,
                }),
                None => {}
            }
            match o.embedding {
                Some(Ok(e)) => {
                    store.add_embedding(dir, &o.id, e)?;
                    summary.embeddings_written += 1;
                }
                Some(Err(reason)) => summary.failures.push(ExtractFailure {
                    sample_id: o.id.clone(),
                    stage: "embedding",
                    reason,
                }),
                None => {}
            }
        }
    }
    for f in &summary.failures {
        log::warn!("{} {} failed: {}", f.sample_id, f.stage, f.reason);
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{write_corpus, CorpusSpec};

    #[test]
    fn runner_spec_parses() {
        assert_eq!("stub:7".parse::<RunnerSpec>().unwrap(), RunnerSpec::Stub(7));
        assert_eq!(
            "sidecar:/tmp/x".parse::<RunnerSpec>().unwrap(),
            RunnerSpec::Sidecar(PathBuf::from("/tmp/x"))
        );
        assert!("stub:x".parse::<RunnerSpec>().is_err());
        assert!("onnx:model".parse::<RunnerSpec>().is_err());
    }

    #[test]
    fn extraction_is_resumable() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            subjects: 2,
            clips_per_subject: 1,
            ..CorpusSpec::default()
        };
        let manifest = write_corpus(dir.path(), &spec).unwrap();
        let store_dir = dir.path().join("store");
        let opts = ExtractOptions {
            data_root: Some(dir.path().to_path_buf()),
            ..ExtractOptions::default()
        };
        let first = extract_features(&manifest, &store_dir, &opts).unwrap();
        assert_eq!((first.acoustic_written, first.embeddings_written), (2, 2));
        assert!(first.failures.is_empty());
        let before = std::fs::read(FeatureStore::embedding_path(&store_dir)).unwrap();

        let again = extract_features(&manifest, &store_dir, &opts).unwrap();
        assert_eq!((again.acoustic_written, again.skipped), (0, 4));
        assert_eq!(std::fs::read(FeatureStore::embedding_path(&store_dir)).unwrap(), before);

        let forced = extract_features(&manifest, &store_dir, &ExtractOptions { force: true, ..opts }).unwrap();
        assert_eq!(forced.embeddings_written, 2);
        assert_eq!(std::fs::read(FeatureStore::embedding_path(&store_dir)).unwrap(), before);
    }
}
