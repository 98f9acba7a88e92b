//! Small two-class audio corpora for demos and end-to-end tests: positive
//! subjects produce tonal bursts, negative subjects broadband noise bursts.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{write_wav, AudioClip, WavEncoding};
use crate::dataset::{write_manifest, Label, Manifest, Modality, SampleRecord};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub subjects: usize,
    pub clips_per_subject: usize,
    pub sample_rate: u32,
    pub min_secs: f64,
    pub max_secs: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            subjects: 40,
            clips_per_subject: 3,
            sample_rate: 22050,
            min_secs: 1.0,
            max_secs: 2.0,
            seed: 0,
        }
    }
}

fn bursts(rng: &mut ChaCha8Rng, n: usize, sr: f64, tonal: bool) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| 0.003 * (rng.gen::<f64>() - 0.5)).collect();
    let count = rng.gen_range(2..=4);
    for _ in 0..count {
        let len = (rng.gen_range(0.12..0.25) * sr) as usize;
        if len >= n {
            continue;
        }
        let start = rng.gen_range(0..n - len);
        let amp = rng.gen_range(0.2..0.6);
        let f0 = rng.gen_range(250.0..900.0);
        let phase = rng.gen_range(0.0..2.0 * PI);
        for i in 0..len {
            let env = (PI * i as f64 / len as f64).sin();
            let t = i as f64 / sr;
            let v = if tonal {
                (2.0 * PI * f0 * t + phase).sin() + 0.4 * (4.0 * PI * f0 * t + phase).sin()
            } else {
                2.0 * (rng.gen::<f64>() - 0.5)
            };
            x[start + i] += amp * env * v;
        }
    }
    x
}

/// Writes `audio/<sample_id>.wav` for every clip plus `manifest.csv` under
/// `dir`, with paths relative to `dir`. Subjects alternate between the two
/// labels; every clip is a cough recording in its own session.
pub fn write_corpus(dir: &Path, spec: &CorpusSpec) -> Result<Manifest> {
    if spec.subjects < 2 || spec.clips_per_subject == 0 || !(spec.min_secs > 0.0 && spec.max_secs >= spec.min_secs) {
        return Err(Error::invalid("corpus needs at least two subjects, one clip each and a valid duration range"));
    }
    let audio = dir.join("audio");
    std::fs::create_dir_all(&audio).map_err(|e| Error::io(&audio, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sr = spec.sample_rate as f64;
    let mut records = Vec::new();
    for s in 0..spec.subjects {
        let label = if s % 2 == 0 { Label::Covid } else { Label::Healthy };
        let subject = format!("subj{s:03}");
        for c in 0..spec.clips_per_subject {
            let secs = rng.gen_range(spec.min_secs..=spec.max_secs);
            let x = bursts(&mut rng, (secs * sr) as usize, sr, label == Label::Covid);
            let sample_id = format!("{subject}_c{c}");
            let rel = format!("audio/{sample_id}.wav");
            write_wav(dir.join(&rel), &AudioClip::new(x, spec.sample_rate)?, WavEncoding::Int16)?;
            records.push(SampleRecord {
                sample_id,
                subject_id: subject.clone(),
                session_id: format!("s{c}"),
                label,
                modality: Modality::Cough,
                path: rel,
                dataset: "synthetic".into(),
                metadata: Default::default(),
            });
        }
    }
    let manifest = Manifest::new(records)?;
    write_manifest(&manifest, &dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
