//! The 477-value hand-crafted descriptor of one recording.
//!
//! Layout: four clip-level scalars (duration, onset count, tempo, dominant
//! frequency) followed by 11 summary statistics for each of 43 per-frame
//! series (RMS, centroid, roll-off, ZCR, 13 MFCC, 13 delta, 13 delta-delta).

mod descriptors;
mod mfcc;
mod rhythm;
mod stats;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::audio::{frame_signal, resample, stft, trim_silence, AudioClip, MelFilterbank};
use crate::error::{Error, Result};

pub use descriptors::{rms_energy_series, rolloff_series, spectral_centroid_series, zcr_series, DescriptorSeries};
pub use mfcc::{dct_matrix, delta, log_mel_db, mfcc_series, LOG_FLOOR, TOP_DB};
pub use rhythm::{
    dominant_period, duration, estimate_tempo, onset_envelope, pick_onsets, OnsetParams, TempoEstimate,
    TempoParams,
};
pub use stats::{summarize, SummaryStatistics, STAT_NAMES};

pub const N_MFCC: usize = 13;
pub const N_SCALARS: usize = 4;
pub const N_SERIES: usize = 4 + 3 * N_MFCC;
pub const ACOUSTIC_DIM: usize = N_SCALARS + N_SERIES * STAT_NAMES.len();

pub const DURATION_INDEX: usize = 0;
pub const ONSET_INDEX: usize = 1;
pub const TEMPO_INDEX: usize = 2;
pub const PERIOD_INDEX: usize = 3;

/// Analysis parameters for the acoustic path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcousticConfig {
    pub sample_rate: u32,
    pub frame_length: usize,
    pub hop_length: usize,
    pub fft_size: usize,
    pub n_mels: usize,
    pub delta_width: usize,
    pub rolloff_pct: f64,
    pub top_db: f64,
    pub onset: OnsetParams,
    pub tempo: TempoParams,
}

impl Default for AcousticConfig {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            frame_length: 2048,
            hop_length: 512,
            fft_size: 2048,
            n_mels: 128,
            delta_width: 9,
            rolloff_pct: 0.85,
            top_db: 60.0,
            onset: OnsetParams::default(),
            tempo: TempoParams::default(),
        }
    }
}

/// Series names in vector order.
pub fn series_names() -> Vec<String> {
    let mut names: Vec<String> = ["rms", "centroid", "rolloff", "zcr"].iter().map(|s| s.to_string()).collect();
    for prefix in ["mfcc", "mfcc_d1", "mfcc_d2"] {
        names.extend((0..N_MFCC).map(|k| format!("{prefix}_{k}")));
    }
    names
}

/// The 477 column names, stable across runs.
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names: Vec<String> = ["duration", "onset_count", "tempo", "period"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for series in series_names() {
            names.extend(STAT_NAMES.iter().map(|stat| format!("{series}_{stat}")));
        }
        names
    })
}

/// Indices of the columns that do not derive from the MFCC deltas.
pub fn non_delta_indices() -> Vec<usize> {
    feature_names()
        .iter()
        .enumerate()
        .filter(|(_, n)| !n.starts_with("mfcc_d"))
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticFeatureVector {
    pub values: Vec<f64>,
}

impl AcousticFeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != ACOUSTIC_DIM {
            return Err(Error::invalid(format!(
                "acoustic vector must have {ACOUSTIC_DIM} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("acoustic feature vector".into()));
        }
        Ok(Self { values })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_names().iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Resamples to the analysis rate and trims leading/trailing silence.
pub fn prepare_clip(clip: &AudioClip, cfg: &AcousticConfig) -> Result<AudioClip> {
    let clip = resample(clip, cfg.sample_rate)?;
    Ok(trim_silence(&clip, cfg.top_db)?.clip)
}

/// Everything computed per frame, exposed for tests and diagnostics.
#[derive(Debug, Clone)]
pub struct FrameAnalysis {
    pub series: Vec<DescriptorSeries>,
    pub onset_envelope: Vec<f64>,
    pub frame_rate: f64,
}

pub fn analyze_frames(clip: &AudioClip, cfg: &AcousticConfig) -> Result<FrameAnalysis> {
    let frames = frame_signal(clip, cfg.frame_length, cfg.hop_length, true)?;
    let spec = stft(&frames, cfg.fft_size)?;
    let sr = clip.sample_rate();
    let mel = MelFilterbank::new(sr, cfg.fft_size, cfg.n_mels, 0.0, sr as f64 / 2.0)?.apply(&spec)?;
    let log_mel = log_mel_db(&mel);
    let mfcc = mfcc_series(&log_mel, N_MFCC)?;
    let d1 = delta(&mfcc, cfg.delta_width, 1)?;
    let d2 = delta(&mfcc, cfg.delta_width, 2)?;

    let mut series = vec![
        rms_energy_series(&spec),
        spectral_centroid_series(&spec),
        rolloff_series(&spec, cfg.rolloff_pct),
        zcr_series(&frames),
    ];
    for (prefix, block) in [("mfcc", &mfcc), ("mfcc_d1", &d1), ("mfcc_d2", &d2)] {
        for (k, row) in block.rows().into_iter().enumerate() {
            series.push(DescriptorSeries::new(format!("{prefix}_{k}"), row.to_vec()));
        }
    }
    Ok(FrameAnalysis {
        series,
        onset_envelope: onset_envelope(&log_mel),
        frame_rate: sr as f64 / cfg.hop_length as f64,
    })
}

/// The full descriptor of an already resampled and trimmed clip.
pub fn acoustic_feature_vector(clip: &AudioClip, cfg: &AcousticConfig) -> Result<AcousticFeatureVector> {
    let analysis = analyze_frames(clip, cfg)?;
    let onsets = pick_onsets(&analysis.onset_envelope, analysis.frame_rate, cfg.n_mels, &cfg.onset);
    let tempo = estimate_tempo(&analysis.onset_envelope, analysis.frame_rate, &cfg.tempo);

    let mut values = Vec::with_capacity(ACOUSTIC_DIM);
    values.push(duration(clip)?);
    values.push(onsets.len() as f64);
    values.push(tempo.bpm);
    values.push(dominant_period(clip)?);
    for s in &analysis.series {
        values.extend(summarize(&s.values)?.to_array());
    }
    AcousticFeatureVector::new(values)
}

/// Onset count of a prepared clip.
pub fn onset_count(clip: &AudioClip, cfg: &AcousticConfig) -> Result<usize> {
    let a = analyze_frames(clip, cfg)?;
    Ok(pick_onsets(&a.onset_envelope, a.frame_rate, cfg.n_mels, &cfg.onset).len())
}

/// Tempo of a prepared clip.
pub fn tempo(clip: &AudioClip, cfg: &AcousticConfig) -> Result<TempoEstimate> {
    let a = analyze_frames(clip, cfg)?;
    Ok(estimate_tempo(&a.onset_envelope, a.frame_rate, &cfg.tempo))
}
