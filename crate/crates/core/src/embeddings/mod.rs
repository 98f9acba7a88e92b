//! Windowed 512-d audio embeddings and their 1024-d mean/std summary.
//!
//! The pretrained network itself lives outside this crate. It is reached
//! either through an [`EmbeddingRunner`] or through precomputed `.l3emb`
//! sidecar files.

mod sidecar;
mod stub;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::audio::{frame_signal, stft, AudioClip, MelFilterbank};
use crate::error::{Error, Result};

pub use sidecar::{find_sidecar, load_precomputed, write_sidecar, write_sidecar_csv, SIDECAR_CSV_EXT, SIDECAR_EXT};
pub use stub::StubRunner;

pub const EMBEDDING_DIM: usize = 512;
pub const AGGREGATED_DIM: usize = 2 * EMBEDDING_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub sample_rate: u32,
    pub window_secs: f64,
    pub hop_secs: f64,
    pub n_mels: usize,
    pub fft_size: usize,
    pub mel_hop: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            sample_rate: 48000,
            window_secs: 1.0,
            hop_secs: 0.1,
            n_mels: 256,
            fft_size: 2048,
            mel_hop: 242,
        }
    }
}

impl EmbeddingConfig {
    fn window_samples(&self) -> usize {
        (self.window_secs * self.sample_rate as f64).round() as usize
    }

    fn hop_samples(&self) -> usize {
        (self.hop_secs * self.sample_rate as f64).round() as usize
    }

    /// Windows produced for a clip of `len` samples at the embedding rate.
    pub fn window_count(&self, len: usize) -> usize {
        let win = self.window_samples();
        if len <= win {
            1
        } else {
            1 + (len - win) / self.hop_samples()
        }
    }
}

/// Maps one mel window, `(n_mels, n_frames)` energies, to 512 values.
/// Implementations must be deterministic.
pub trait EmbeddingRunner: Send + Sync {
    fn embed(&self, mel_window: &Array2<f64>) -> Result<Vec<f64>, String>;
}

/// Per-window embeddings of one recording, `(n_windows, 512)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub sample_id: String,
    pub rows: Array2<f32>,
    pub window_secs: f64,
    pub hop_secs: f64,
}

impl EmbeddingMatrix {
    pub fn new(sample_id: impl Into<String>, rows: Array2<f32>) -> Result<Self> {
        if rows.ncols() != EMBEDDING_DIM {
            return Err(Error::invalid(format!(
                "wrong row width: expected {EMBEDDING_DIM}, got {}",
                rows.ncols()
            )));
        }
        if rows.nrows() == 0 {
            return Err(Error::invalid("embedding matrix has no windows"));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding matrix".into()));
        }
        let d = EmbeddingConfig::default();
        Ok(Self {
            sample_id: sample_id.into(),
            rows,
            window_secs: d.window_secs,
            hop_secs: d.hop_secs,
        })
    }

    pub fn n_windows(&self) -> usize {
        self.rows.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedEmbedding {
    pub values: Vec<f64>,
}

/// Reusable windowing front end; builds the mel filterbank once.
#[derive(Debug, Clone)]
pub struct WindowEmbedder {
    cfg: EmbeddingConfig,
    filterbank: MelFilterbank,
}

impl WindowEmbedder {
    pub fn new(cfg: EmbeddingConfig) -> Result<Self> {
        if !(cfg.window_secs > 0.0 && cfg.hop_secs > 0.0) {
            return Err(Error::invalid("embedding window and hop must be positive"));
        }
        let sr = cfg.sample_rate;
        let filterbank = MelFilterbank::new(sr, cfg.fft_size, cfg.n_mels, 0.0, sr as f64 / 2.0)?;
        Ok(Self { cfg, filterbank })
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.cfg
    }

    /// Mel energies of one window of samples.
    pub fn mel_window(&self, samples: &[f64]) -> Result<Array2<f64>> {
        let clip = AudioClip::new(samples.to_vec(), self.cfg.sample_rate)?;
        let frames = frame_signal(&clip, self.cfg.fft_size, self.cfg.mel_hop, true)?;
        Ok(self.filterbank.apply(&stft(&frames, self.cfg.fft_size)?)?.energies)
    }

    /// One embedding row per 1 s window every 0.1 s; shorter clips are
    /// zero-padded to a single window.
    pub fn embed_windows(
        &self,
        sample_id: &str,
        clip: &AudioClip,
        runner: &dyn EmbeddingRunner,
    ) -> Result<EmbeddingMatrix> {
        if clip.sample_rate() != self.cfg.sample_rate {
            return Err(Error::invalid(format!(
                "embedding path expects {} Hz audio, got {}",
                self.cfg.sample_rate,
                clip.sample_rate()
            )));
        }
        if clip.is_empty() {
            return Err(Error::EmptyAudio);
        }
        let win = self.cfg.window_samples();
        let hop = self.cfg.hop_samples();
        let padded = clip.padded_to(win);
        let x = padded.samples();
        let n = self.cfg.window_count(clip.len());

        let mut rows = Array2::<f32>::zeros((n, EMBEDDING_DIM));
        for w in 0..n {
            let mel = self.mel_window(&x[w * hop..w * hop + win])?;
            let out = runner
                .embed(&mel)
                .map_err(|reason| Error::Runner { window: w, reason })?;
            if out.len() != EMBEDDING_DIM {
                return Err(Error::Runner {
                    window: w,
                    reason: format!("runner returned {} values, expected {EMBEDDING_DIM}", out.len()),
                });
            }
            for (dst, v) in rows.row_mut(w).iter_mut().zip(out) {
                *dst = v as f32;
            }
        }
        let mut m = EmbeddingMatrix::new(sample_id, rows)?;
        m.window_secs = self.cfg.window_secs;
        m.hop_secs = self.cfg.hop_secs;
        Ok(m)
    }
}

/// Convenience wrapper around [`WindowEmbedder::embed_windows`] with the
/// default configuration.
pub fn embed_windows(sample_id: &str, clip: &AudioClip, runner: &dyn EmbeddingRunner) -> Result<EmbeddingMatrix> {
    WindowEmbedder::new(EmbeddingConfig::default())?.embed_windows(sample_id, clip, runner)
}

/// Per-dimension mean followed by per-dimension population standard
/// deviation.
pub fn aggregate_embeddings(matrix: &EmbeddingMatrix) -> Result<AggregatedEmbedding> {
    let n = matrix.rows.nrows();
    if n == 0 {
        return Err(Error::invalid("cannot aggregate an empty embedding matrix"));
    }
    let rows = matrix.rows.mapv(f64::from);
    let mean = rows.mean_axis(Axis(0)).unwrap();
    let mut var = vec![0.0; rows.ncols()];
    for row in rows.rows() {
        for (j, v) in row.iter().enumerate() {
            let d = v - mean[j];
            var[j] += d * d;
        }
    }
    let mut values = mean.to_vec();
    values.extend(var.iter().map(|v| (v / n as f64).sqrt()));
    Ok(AggregatedEmbedding { values })
}
