use ndarray::Array2;

use crate::audio::Spectrogram;
use crate::error::{Error, Result};

const LINEAR_HZ_PER_MEL: f64 = 200.0 / 3.0;
const LOG_BREAK_HZ: f64 = 1000.0;
const LOG_BREAK_MEL: f64 = LOG_BREAK_HZ / LINEAR_HZ_PER_MEL;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < LOG_BREAK_HZ {
        hz / LINEAR_HZ_PER_MEL
    } else {
        LOG_BREAK_MEL + (hz / LOG_BREAK_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < LOG_BREAK_MEL {
        mel * LINEAR_HZ_PER_MEL
    } else {
        LOG_BREAK_HZ * ((mel - LOG_BREAK_MEL) * log_step()).exp()
    }
}

/// Mel band energies, `(n_mels, n_frames)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub energies: Array2<f64>,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.energies.ncols()
    }
}

/// Triangular, area-normalised filters on the Slaney mel scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `(n_mels, n_bins)`
    pub weights: Array2<f64>,
    pub sample_rate: u32,
    pub fft_size: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl MelFilterbank {
    pub fn new(sample_rate: u32, fft_size: usize, n_mels: usize, fmin: f64, fmax: f64) -> Result<Self> {
        if n_mels == 0 {
            return Err(Error::invalid("n_mels must be at least 1"));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if !(fmin >= 0.0 && fmin < fmax && fmax <= nyquist) {
            return Err(Error::invalid(format!(
                "mel range [{fmin}, {fmax}] must satisfy 0 <= fmin < fmax <= {nyquist}"
            )));
        }
        let n_bins = fft_size / 2 + 1;
        let bin_hz: Vec<f64> = (0..n_bins)
            .map(|k| k as f64 * sample_rate as f64 / fft_size as f64)
            .collect();
        let (mel_lo, mel_hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();

        let mut weights = Array2::<f64>::zeros((n_mels, n_bins));
        for m in 0..n_mels {
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (right - left);
            for (k, &f) in bin_hz.iter().enumerate() {
                let rising = (f - left) / (centre - left);
                let falling = (right - f) / (right - centre);
                let w = rising.min(falling).max(0.0);
                weights[[m, k]] = w * norm;
            }
        }
        Ok(Self {
            weights,
            sample_rate,
            fft_size,
            fmin,
            fmax,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }

    /// Applies the filters to the power (squared magnitude) spectrogram.
    pub fn apply(&self, spec: &Spectrogram) -> Result<MelSpectrogram> {
        if spec.n_bins() != self.weights.ncols() || spec.sample_rate != self.sample_rate {
            return Err(Error::invalid(format!(
                "filterbank built for {} bins at {} Hz, spectrogram has {} bins at {} Hz",
                self.weights.ncols(),
                self.sample_rate,
                spec.n_bins(),
                spec.sample_rate
            )));
        }
        let power = spec.magnitudes.mapv(|m| m * m);
        Ok(MelSpectrogram {
            energies: self.weights.dot(&power),
            n_mels: self.n_mels(),
            fmin: self.fmin,
            fmax: self.fmax,
        })
    }
}

/// Builds a filterbank matching `spec` and applies it.
pub fn mel_spectrogram(spec: &Spectrogram, n_mels: usize, fmin: f64, fmax: f64) -> Result<MelSpectrogram> {
    MelFilterbank::new(spec.sample_rate, spec.fft_size, n_mels, fmin, fmax)?.apply(spec)
}
