//! Feature-set assembly, standardisation and PCA.

mod pca;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::Modality;
use crate::embeddings::{AggregatedEmbedding, AGGREGATED_DIM};
use crate::error::{Error, Result};
use crate::features::{non_delta_indices, AcousticFeatureVector, DURATION_INDEX, PERIOD_INDEX, TEMPO_INDEX};

pub use pca::{fit_pca, PcaModel};

pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSetId {
    F1,
    F2,
    F3,
    F4,
}

impl FeatureSetId {
    pub const ALL: [FeatureSetId; 4] = [FeatureSetId::F1, FeatureSetId::F2, FeatureSetId::F3, FeatureSetId::F4];

    /// Width for a single recording.
    pub fn width(&self) -> usize {
        AGGREGATED_DIM + self.acoustic_indices().len()
    }

    /// Acoustic columns appended after the embedding, in order.
    pub fn acoustic_indices(&self) -> Vec<usize> {
        match self {
            FeatureSetId::F1 => vec![],
            FeatureSetId::F2 => vec![PERIOD_INDEX, TEMPO_INDEX, DURATION_INDEX],
            FeatureSetId::F3 => non_delta_indices(),
            FeatureSetId::F4 => (0..crate::features::ACOUSTIC_DIM).collect(),
        }
    }

    pub fn needs_acoustic(&self) -> bool {
        *self != FeatureSetId::F1
    }
}

impl fmt::Display for FeatureSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for FeatureSetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F1" => Ok(FeatureSetId::F1),
            "F2" => Ok(FeatureSetId::F2),
            "F3" => Ok(FeatureSetId::F3),
            "F4" => Ok(FeatureSetId::F4),
            other => Err(Error::invalid(format!("unknown feature set {other:?}; expected F1..F4"))),
        }
    }
}

/// Which recordings of a session feed one fused vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionModality {
    Cough,
    Breath,
    Voice,
    CoughBreath,
}

impl FusionModality {
    pub fn parts(&self) -> &'static [Modality] {
        match self {
            FusionModality::Cough => &[Modality::Cough],
            FusionModality::Breath => &[Modality::Breath],
            FusionModality::Voice => &[Modality::Voice],
            FusionModality::CoughBreath => &[Modality::Cough, Modality::Breath],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FusionModality::Cough => "cough",
            FusionModality::Breath => "breath",
            FusionModality::Voice => "voice",
            FusionModality::CoughBreath => "cough-breath",
        }
    }
}

impl fmt::Display for FusionModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedVector {
    pub values: Vec<f64>,
    pub set: FeatureSetId,
    pub modality: FusionModality,
}

/// Features of one recording.
#[derive(Debug, Clone, Copy)]
pub struct RecordingFeatures<'a> {
    pub acoustic: Option<&'a AcousticFeatureVector>,
    pub embedding: &'a AggregatedEmbedding,
}

/// Concatenates the embedding with the set's acoustic columns, once per
/// recording of the modality (cough before breath).
pub fn assemble_features(
    set: FeatureSetId,
    modality: FusionModality,
    parts: &[RecordingFeatures<'_>],
) -> Result<FusedVector> {
    if parts.len() != modality.parts().len() {
        return Err(Error::invalid(format!(
            "modality {modality} needs {} recordings, got {}",
            modality.parts().len(),
            parts.len()
        )));
    }
    let idx = set.acoustic_indices();
    let mut values = Vec::with_capacity(set.width() * parts.len());
    for (p, m) in parts.iter().zip(modality.parts()) {
        if p.embedding.values.len() != AGGREGATED_DIM {
            return Err(Error::invalid(format!(
                "{m} embedding has width {}, expected {AGGREGATED_DIM}",
                p.embedding.values.len()
            )));
        }
        values.extend_from_slice(&p.embedding.values);
        if set.needs_acoustic() {
            let a = p
                .acoustic
                .ok_or_else(|| Error::invalid(format!("{set} needs acoustic features for the {m} recording")))?;
            values.extend(idx.iter().map(|&i| a.values[i]));
        }
    }
    assert_eq!(values.len(), set.width() * parts.len());
    Ok(FusedVector { values, set, modality })
}

/// Column-wise z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid("cannot fit a standardizer on an empty matrix"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("standardizer input".into()));
        }
        let mean = x.mean_axis(Axis(0)).unwrap();
        let std = x.std_axis(Axis(0), 0.0);
        Ok(Self { mean, std })
    }

    /// Applies the training statistics; columns whose spread is below the
    /// floor map to zero.
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::invalid(format!(
                "standardizer fitted on {} columns, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if *s < STD_FLOOR { 0.0 } else { (*v - m) / s };
            }
        }
        Ok(out)
    }
}

pub fn fit_standardizer(x: &Array2<f64>) -> Result<Standardizer> {
    Standardizer::fit(x)
}

pub fn apply_standardizer(s: &Standardizer, x: &Array2<f64>) -> Result<Array2<f64>> {
    s.transform(x)
}
