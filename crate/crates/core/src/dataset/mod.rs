//! Uniform sample manifests for cough/breath/voice corpora.

mod coswara;
mod tasks;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use coswara::{scan_coswara_layout, CoswaraScan, SkipEntry, StatusMap};
pub use tasks::{Condition, TaskFilter};

pub const REQUIRED_COLUMNS: [&str; 7] = ["sample_id", "subject_id", "session_id", "label", "modality", "path", "dataset"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Healthy,
    Covid,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Healthy, Label::Covid];

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Healthy => "healthy",
            Label::Covid => "covid",
        }
    }

    /// +1 for the positive (covid) class, -1 otherwise.
    pub fn sign(&self) -> f64 {
        match self {
            Label::Healthy => -1.0,
            Label::Covid => 1.0,
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "healthy" => Ok(Label::Healthy),
            "covid" => Ok(Label::Covid),
            other => Err(Error::Manifest(format!("unknown label {other:?}; allowed: healthy, covid"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Cough,
    Breath,
    Voice,
}

impl Modality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Cough => "cough",
            Modality::Breath => "breath",
            Modality::Voice => "voice",
        }
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cough" => Ok(Modality::Cough),
            "breath" => Ok(Modality::Breath),
            "voice" => Ok(Modality::Voice),
            other => Err(Error::Manifest(format!(
                "unknown modality {other:?}; allowed: cough, breath, voice"
            ))),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub subject_id: String,
    pub session_id: String,
    pub label: Label,
    pub modality: Modality,
    pub path: String,
    pub dataset: String,
    /// Any further manifest columns, e.g. symptoms used by task filters.
    pub metadata: BTreeMap<String, String>,
}

impl SampleRecord {
    /// Value of a required or metadata column.
    pub fn column(&self, name: &str) -> Option<&str> {
        Some(match name {
            "sample_id" => &self.sample_id,
            "subject_id" => &self.subject_id,
            "session_id" => &self.session_id,
            "label" => self.label.as_str(),
            "modality" => self.modality.as_str(),
            "path" => &self.path,
            "dataset" => &self.dataset,
            other => return self.metadata.get(other).map(String::as_str),
        })
    }

    /// The audio path, prefixed with `root` when relative.
    pub fn resolve_path(&self, root: Option<&Path>) -> PathBuf {
        let p = PathBuf::from(&self.path);
        match root {
            Some(r) if p.is_relative() => r.join(p),
            _ => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<SampleRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub label: Label,
    pub count: usize,
}

impl Manifest {
    pub fn new(records: Vec<SampleRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if r.sample_id.is_empty() || r.subject_id.is_empty() {
                return Err(Error::Manifest(format!(
                    "record {:?} needs non-empty sample_id and subject_id",
                    r.sample_id
                )));
            }
            if !seen.insert(r.sample_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate sample_id {:?}", r.sample_id)));
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.subject_id.as_str()).collect()
    }

    /// Sample counts per (dataset, label, modality).
    pub fn counts(&self) -> BTreeMap<(String, Label, Modality), usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry((r.dataset.clone(), r.label, r.modality)).or_insert(0) += 1;
        }
        out
    }

    /// Metadata column names across all records, sorted.
    pub fn metadata_columns(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.records.iter().flat_map(|r| r.metadata.keys()).collect();
        set.into_iter().cloned().collect()
    }

    pub fn filter(&self, keep: impl Fn(&SampleRecord) -> bool) -> Manifest {
        Manifest {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }
}

/// Sample counts per (dataset, label).
pub fn manifest_summary(manifest: &Manifest) -> Vec<SummaryRow> {
    let mut counts: BTreeMap<(String, Label), usize> = BTreeMap::new();
    for r in &manifest.records {
        *counts.entry((r.dataset.clone(), r.label)).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|((dataset, label), count)| SummaryRow { dataset, label, count })
        .collect()
}

pub fn parse_manifest(path: &Path) -> Result<Manifest> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(file)
}

pub fn read_manifest(reader: impl std::io::Read) -> Result<Manifest> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Manifest(e.to_string()))?.clone();
    let missing: Vec<&str> = REQUIRED_COLUMNS
        .iter()
        .filter(|c| !headers.iter().any(|h| h == **c))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Manifest(format!("missing columns: {}", missing.join(", "))));
    }
    let idx = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let extra: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !REQUIRED_COLUMNS.contains(h))
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut records = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::Manifest(format!("row {}: {e}", line + 2)))?;
        let get = |name: &str| row.get(idx(name)).unwrap_or("").to_string();
        records.push(SampleRecord {
            sample_id: get("sample_id"),
            subject_id: get("subject_id"),
            session_id: get("session_id"),
            label: get("label").parse()?,
            modality: get("modality").parse()?,
            path: get("path"),
            dataset: get("dataset"),
            metadata: extra
                .iter()
                .map(|(i, h)| (h.clone(), row.get(*i).unwrap_or("").to_string()))
                .collect(),
        });
    }
    Manifest::new(records)
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_manifest_to(manifest, file)
}

pub fn write_manifest_to(manifest: &Manifest, writer: impl std::io::Write) -> Result<()> {
    let extra = manifest.metadata_columns();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend(extra.iter().map(String::as_str));
    let err = |e: csv::Error| Error::Manifest(e.to_string());
    w.write_record(&header).map_err(err)?;
    for r in &manifest.records {
        let mut row: Vec<&str> = REQUIRED_COLUMNS.iter().map(|c| r.column(c).unwrap()).collect();
        row.extend(extra.iter().map(|c| r.metadata.get(c).map_or("", String::as_str)));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Manifest(e.to_string()))
}
