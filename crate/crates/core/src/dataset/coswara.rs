use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, Manifest, Modality, SampleRecord};
use crate::error::{Error, Result};

const DEFAULT_STATUS_MAP: &str = include_str!("../../config/coswara_status_map.toml");
const METADATA_FILE: &str = "metadata.json";

/// Health-status vocabulary of one corpus snapshot mapped onto labels.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatusMap {
    pub version: String,
    /// Metadata key holding the status string.
    pub status_key: String,
    /// status -> "healthy" | "covid" | "skip"
    pub status: BTreeMap<String, String>,
}

impl StatusMap {
    pub fn from_toml(text: &str) -> Result<Self> {
        let map: StatusMap = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in &map.status {
            if !matches!(v.as_str(), "healthy" | "covid" | "skip") {
                return Err(Error::Config(format!(
                    "status {k:?} maps to {v:?}; expected healthy, covid or skip"
                )));
            }
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// `None` when the status is unmapped or explicitly skipped.
    pub fn label(&self, status: &str) -> Option<Label> {
        self.status.get(status).and_then(|v| v.parse().ok())
    }
}

impl Default for StatusMap {
    fn default() -> Self {
        Self::from_toml(DEFAULT_STATUS_MAP).expect("bundled status map parses")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkipEntry {
    pub subject_id: String,
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoswaraScan {
    pub manifest: Manifest,
    pub skipped: Vec<SkipEntry>,
}

impl CoswaraScan {
    /// Skip report, one JSON object per line.
    pub fn skip_report_jsonl(&self) -> String {
        self.skipped
            .iter()
            .map(|s| serde_json::to_string(s).unwrap() + "\n")
            .collect()
    }
}

fn modality_of(stem: &str) -> Option<Modality> {
    let s = stem.to_ascii_lowercase();
    if s.starts_with("cough") {
        Some(Modality::Cough)
    } else if s.starts_with("breath") {
        Some(Modality::Breath)
    } else if s.starts_with("counting") || s.starts_with("vowel") {
        Some(Modality::Voice)
    } else {
        None
    }
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

/// Walks `<root>/<date>/<subject>/` folders, each holding WAV recordings and a
/// `metadata.json` with the self-reported status.
pub fn scan_coswara_layout(root: &Path, map: &StatusMap) -> Result<CoswaraScan> {
    let mut subjects = Vec::new();
    for date in sorted_dirs(root)? {
        for subject in sorted_dirs(&date)? {
            subjects.push((date.clone(), subject));
        }
    }
    let per_subject: Vec<Result<(Vec<SampleRecord>, Vec<SkipEntry>)>> = subjects
        .par_iter()
        .map(|(date, dir)| scan_subject(date, dir, map))
        .collect();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for r in per_subject {
        let (recs, skips) = r?;
        records.extend(recs);
        skipped.extend(skips);
    }
    for s in &skipped {
        log::info!("skipped {} ({}): {}", s.path, s.subject_id, s.reason);
    }
    Ok(CoswaraScan {
        manifest: Manifest::new(records)?,
        skipped,
    })
}

fn scan_subject(date: &Path, dir: &Path, map: &StatusMap) -> Result<(Vec<SampleRecord>, Vec<SkipEntry>)> {
    let name = |p: &Path| p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
    let subject_id = name(dir);
    let session_id = name(date);
    let meta_path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Manifest(format!("{}: {e}", meta_path.display())))?;
    let status = meta
        .get(&map.status_key)
        .and_then(|v| v.as_str())
        .unwrap_or("")
        .to_string();

    let mut wavs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    wavs.sort();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let label = map.label(&status);
    for wav in wavs {
        let path = wav.to_string_lossy().into_owned();
        let skip = |reason: String| SkipEntry {
            subject_id: subject_id.clone(),
            path: path.clone(),
            reason,
        };
        let Some(label) = label else {
            skipped.push(skip(format!("status {status:?} has no label in map {}", map.version)));
            continue;
        };
        let stem = wav.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let Some(modality) = modality_of(stem) else {
            skipped.push(skip(format!("recording type {stem:?} not recognised")));
            continue;
        };
        records.push(SampleRecord {
            sample_id: format!("{subject_id}_{stem}"),
            subject_id: subject_id.clone(),
            session_id: session_id.clone(),
            label,
            modality,
            path,
            dataset: "coswara".into(),
            metadata: BTreeMap::from([("status".to_string(), status.clone())]),
        });
    }
    Ok((records, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subject(root: &Path, date: &str, id: &str, status: &str, files: &[&str]) {
        let dir = root.join(date).join(id);
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join(METADATA_FILE), format!("{{\"covid_status\": \"{status}\", \"a\": 3}}")).unwrap();
        for f in files {
            fs::write(dir.join(f), b"RIFF").unwrap();
        }
    }

    #[test]
    fn bundled_map_parses() {
        let m = StatusMap::default();
        assert_eq!(m.label("healthy"), Some(Label::Healthy));
        assert_eq!(m.label("positive_mild"), Some(Label::Covid));
        assert_eq!(m.label("resp_illness_not_identified"), None);
        assert_eq!(m.label("never heard of it"), None);
    }

    #[test]
    fn heavy_and_shallow_coughs_share_a_subject() {
        let dir = tempfile::tempdir().unwrap();
        subject(dir.path(), "20200413", "u1", "healthy", &["cough-heavy.wav", "cough-shallow.wav", "notes.txt"]);
        subject(dir.path(), "20200413", "u2", "positive_moderate", &["cough-heavy.wav", "breathing-deep.wav"]);
        subject(dir.path(), "20200502", "u3", "resp_illness_not_identified", &["cough-heavy.wav"]);
        let scan = scan_coswara_layout(dir.path(), &StatusMap::default()).unwrap();
        let m = &scan.manifest;
        let u1: Vec<&SampleRecord> = m.records.iter().filter(|r| r.subject_id == "u1").collect();
        assert_eq!(u1.len(), 2);
        assert!(u1.iter().all(|r| r.modality == Modality::Cough && r.label == Label::Healthy));
        assert_eq!(u1[0].session_id, "20200413");
        let u2: Vec<Modality> = m.records.iter().filter(|r| r.subject_id == "u2").map(|r| r.modality).collect();
        assert_eq!(u2, vec![Modality::Breath, Modality::Cough]);
        assert_eq!(scan.skipped.len(), 1);
        assert_eq!(scan.skipped[0].subject_id, "u3");
        assert!(scan.skip_report_jsonl().contains("resp_illness_not_identified"));
    }

    #[test]
    fn missing_metadata_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("d").join("u")).unwrap();
        assert!(scan_coswara_layout(dir.path(), &StatusMap::default()).is_err());
    }

    #[test]
    fn bad_map_values_rejected() {
        let text = "version = \"x\"\nstatus_key = \"s\"\n[status]\nfoo = \"maybe\"\n";
        assert!(StatusMap::from_toml(text).is_err());
    }
}
