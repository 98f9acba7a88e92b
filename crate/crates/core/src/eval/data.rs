use std::collections::BTreeMap;

use ndarray::Array2;

use crate::dataset::{Label, Manifest, Modality};
use crate::error::{Error, Result};
use crate::fusion::{assemble_features, FeatureSetId, FusionModality, RecordingFeatures};
use crate::store::FeatureStore;

/// One classification instance: a single recording, or a cough/breath pair
/// from the same session.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub id: String,
    pub subject: String,
    pub label: Label,
    /// Sample ids in fusion order.
    pub samples: Vec<String>,
}

/// Units of a fusion modality, ordered by id. Paired modalities match the
/// i-th recording of each part within a session (by sample id), so sessions
/// missing a part contribute nothing.
pub fn build_units(manifest: &Manifest, modality: FusionModality) -> Vec<Unit> {
    let mut sessions: BTreeMap<(&str, &str), Vec<Vec<&str>>> = BTreeMap::new();
    let mut labels: BTreeMap<&str, Label> = BTreeMap::new();
    let parts = modality.parts();
    for r in &manifest.records {
        let Some(slot) = parts.iter().position(|m: &Modality| *m == r.modality) else {
            continue;
        };
        let entry = sessions
            .entry((r.subject_id.as_str(), r.session_id.as_str()))
            .or_insert_with(|| vec![Vec::new(); parts.len()]);
        entry[slot].push(r.sample_id.as_str());
        labels.insert(r.sample_id.as_str(), r.label);
    }
    let mut units = Vec::new();
    for ((subject, _), mut slots) in sessions {
        slots.iter_mut().for_each(|s| s.sort_unstable());
        let n = slots.iter().map(Vec::len).min().unwrap_or(0);
        for i in 0..n {
            let samples: Vec<String> = slots.iter().map(|s| s[i].to_string()).collect();
            units.push(Unit {
                id: samples.join("+"),
                subject: subject.to_string(),
                label: labels[samples[0].as_str()],
                samples,
            });
        }
    }
    units.sort_by(|a, b| a.id.cmp(&b.id));
    units
}

/// Fused feature rows for every unit, with +1 / -1 targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub modality: FusionModality,
    pub set: FeatureSetId,
    pub units: Vec<Unit>,
    pub x: Array2<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn labels(&self) -> Vec<Label> {
        self.units.iter().map(|u| u.label).collect()
    }

    pub fn rows(&self, idx: &[usize]) -> (Array2<f64>, Vec<f64>) {
        (self.x.select(ndarray::Axis(0), idx), idx.iter().map(|&i| self.y[i]).collect())
    }
}

pub fn assemble_dataset(
    manifest: &Manifest,
    store: &FeatureStore,
    modality: FusionModality,
    set: FeatureSetId,
) -> Result<Dataset> {
    let units = build_units(manifest, modality);
    if units.is_empty() {
        return Err(Error::Evaluation(format!("manifest has no {modality} units")));
    }
    let width = set.width() * modality.parts().len();
    let mut x = Array2::zeros((units.len(), width));
    for (row, u) in units.iter().enumerate() {
        let mut parts = Vec::with_capacity(u.samples.len());
        for id in &u.samples {
            let embedding = store
                .embeddings
                .get(id)
                .ok_or_else(|| Error::Store(format!("no embedding for sample {id}")))?;
            let acoustic = if set.needs_acoustic() {
                Some(
                    store
                        .acoustic
                        .get(id)
                        .ok_or_else(|| Error::Store(format!("no acoustic features for sample {id}")))?,
                )
            } else {
                None
            };
            parts.push(RecordingFeatures { acoustic, embedding });
        }
        let fused = assemble_features(set, modality, &parts)?;
        x.row_mut(row).assign(&ndarray::ArrayView1::from(&fused.values));
    }
    let y = units.iter().map(|u| u.label.sign()).collect();
    Ok(Dataset {
        modality,
        set,
        units,
        x,
        y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::read_manifest;

    fn manifest() -> Manifest {
        let csv = "\
sample_id,subject_id,session_id,label,modality,path,dataset
a_c1,a,1,covid,cough,x,d
a_c2,a,1,covid,cough,x,d
a_b1,a,1,covid,breath,x,d
b_c1,b,1,healthy,cough,x,d
b_b1,b,2,healthy,breath,x,d
";
        read_manifest(csv.as_bytes()).unwrap()
    }

    #[test]
    fn single_and_paired_units() {
        let m = manifest();
        let coughs = build_units(&m, FusionModality::Cough);
        assert_eq!(coughs.iter().map(|u| u.id.as_str()).collect::<Vec<_>>(), vec!["a_c1", "a_c2", "b_c1"]);
        let pairs = build_units(&m, FusionModality::CoughBreath);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].samples, vec!["a_c1", "a_b1"]);
        assert_eq!(pairs[0].label, Label::Covid);
        assert!(build_units(&m, FusionModality::Voice).is_empty());
    }

    #[test]
    fn missing_features_reported() {
        let err = assemble_dataset(&manifest(), &FeatureStore::default(), FusionModality::Cough, FeatureSetId::F1);
        assert!(matches!(err, Err(Error::Store(_))));
    }
}
