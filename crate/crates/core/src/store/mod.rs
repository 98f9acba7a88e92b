//! Feature store: one CSV of acoustic vectors and one of aggregated
//! embeddings, keyed by `sample_id`. Rows are appended, so an interrupted
//! extraction resumes where it stopped.

mod extract;

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use crate::embeddings::{AggregatedEmbedding, AGGREGATED_DIM, EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::features::{feature_names, AcousticFeatureVector};

pub use extract::{extract_features, ExtractFailure, ExtractOptions, ExtractSummary, RunnerSpec};

pub const ACOUSTIC_FILE: &str = "acoustic.csv";
pub const EMBEDDING_FILE: &str = "embeddings.csv";

pub fn embedding_names() -> Vec<String> {
    (0..EMBEDDING_DIM)
        .map(|i| format!("emb_mean_{i}"))
        .chain((0..EMBEDDING_DIM).map(|i| format!("emb_std_{i}")))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureStore {
    pub acoustic: BTreeMap<String, AcousticFeatureVector>,
    pub embeddings: BTreeMap<String, AggregatedEmbedding>,
}

fn read_table(path: &Path, names: &[String]) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let bad = |msg: String| Error::Store(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() != names.len() + 1 || &header[0] != "sample_id" || header.iter().skip(1).ne(names.iter().map(String::as_str)) {
        return Err(bad("unexpected header".into()));
    }
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let values = row
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        if out.insert(row[0].to_string(), values).is_some() {
            return Err(bad(format!("duplicate sample_id {:?}", &row[0])));
        }
    }
    Ok(out)
}

fn append_row(path: &Path, names: &[String], id: &str, values: &[f64]) -> Result<()> {
    let fresh = !path.exists() || std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let fail = |e: csv::Error| Error::Store(format!("{}: {e}", path.display()));
    if fresh {
        w.write_record(std::iter::once("sample_id").chain(names.iter().map(String::as_str)))
            .map_err(fail)?;
    }
    let mut row = Vec::with_capacity(values.len() + 1);
    row.push(id.to_string());
    row.extend(values.iter().map(|v| v.to_string()));
    w.write_record(&row).map_err(fail)?;
    w.flush().map_err(|e| Error::io(path, e))
}

impl FeatureStore {
    pub fn acoustic_path(dir: &Path) -> PathBuf {
        dir.join(ACOUSTIC_FILE)
    }

    pub fn embedding_path(dir: &Path) -> PathBuf {
        dir.join(EMBEDDING_FILE)
    }

    /// Loads whatever the directory holds; missing files are empty tables.
    pub fn open(dir: &Path) -> Result<Self> {
        let acoustic = read_table(&Self::acoustic_path(dir), feature_names())?
            .into_iter()
            .map(|(k, v)| Ok((k, AcousticFeatureVector::new(v)?)))
            .collect::<Result<_>>()?;
        let embeddings = read_table(&Self::embedding_path(dir), &embedding_names())?
            .into_iter()
            .map(|(k, values)| {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Store(format!("non-finite embedding for {k}")));
                }
                Ok((k, AggregatedEmbedding { values }))
            })
            .collect::<Result<_>>()?;
        Ok(Self { acoustic, embeddings })
    }

    /// Appends to disk and to the in-memory table.
    pub fn add_acoustic(&mut self, dir: &Path, id: &str, v: AcousticFeatureVector) -> Result<()> {
        if self.acoustic.contains_key(id) {
            return Err(Error::Store(format!("acoustic row for {id} already stored")));
        }
        append_row(&Self::acoustic_path(dir), feature_names(), id, &v.values)?;
        self.acoustic.insert(id.to_string(), v);
        Ok(())
    }

    pub fn add_embedding(&mut self, dir: &Path, id: &str, e: AggregatedEmbedding) -> Result<()> {
        if e.values.len() != AGGREGATED_DIM {
            return Err(Error::Store(format!("embedding for {id} has {} values", e.values.len())));
        }
        if self.embeddings.contains_key(id) {
            return Err(Error::Store(format!("embedding row for {id} already stored")));
        }
        append_row(&Self::embedding_path(dir), &embedding_names(), id, &e.values)?;
        self.embeddings.insert(id.to_string(), e);
        Ok(())
    }

    /// Rewrites both files from memory, sorted by sample id.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for path in [Self::acoustic_path(dir), Self::embedding_path(dir)] {
            if path.exists() {
                std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        for (id, v) in &self.acoustic {
            append_row(&Self::acoustic_path(dir), feature_names(), id, &v.values)?;
        }
        let names = embedding_names();
        for (id, e) in &self.embeddings {
            append_row(&Self::embedding_path(dir), &names, id, &e.values)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ACOUSTIC_DIM;

    fn acoustic(seed: f64) -> AcousticFeatureVector {
        AcousticFeatureVector::new((0..ACOUSTIC_DIM).map(|i| seed + i as f64 / 7.0).collect()).unwrap()
    }

    fn embedding(seed: f64) -> AggregatedEmbedding {
        AggregatedEmbedding {
            values: (0..AGGREGATED_DIM).map(|i| seed * 1e-9 + (i as f64).sqrt()).collect(),
        }
    }

    #[test]
    fn rows_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = FeatureStore::open(dir.path()).unwrap();
        assert!(s.acoustic.is_empty());
        s.add_acoustic(dir.path(), "a", acoustic(0.1)).unwrap();
        s.add_acoustic(dir.path(), "b", acoustic(-3.3e-12)).unwrap();
        s.add_embedding(dir.path(), "a", embedding(1.0)).unwrap();
        let back = FeatureStore::open(dir.path()).unwrap();
        assert_eq!(back, s);
        assert!(s.add_acoustic(dir.path(), "a", acoustic(0.0)).is_err());

        let header = std::fs::read_to_string(FeatureStore::acoustic_path(dir.path())).unwrap();
        let first = header.lines().next().unwrap();
        assert_eq!(first.split(',').count(), 478);
        assert!(first.starts_with("sample_id,duration,onset_count,tempo,period,"));
    }

    #[test]
    fn save_rewrites_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = FeatureStore::default();
        s.embeddings.insert("z".into(), embedding(2.0));
        s.embeddings.insert("m".into(), embedding(3.0));
        s.save(dir.path()).unwrap();
        let text = std::fs::read_to_string(FeatureStore::embedding_path(dir.path())).unwrap();
        let ids: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(ids, vec!["m", "z"]);
        assert_eq!(FeatureStore::open(dir.path()).unwrap(), s);
    }

    #[test]
    fn malformed_tables_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(FeatureStore::acoustic_path(dir.path()), "sample_id,x\na,1\n").unwrap();
        assert!(FeatureStore::open(dir.path()).is_err());
    }
}
