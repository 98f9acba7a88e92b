use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnsetParams {
    /// A peak must be the strict maximum within this many seconds each side.
    pub local_max_secs: f64,
    /// Half-width of the moving-mean threshold window.
    pub mean_window_secs: f64,
    /// Margin over the local mean, as a fraction of the envelope maximum.
    pub delta: f64,
    /// Minimum mean per-band dB rise for a peak to count at all.
    pub min_band_rise_db: f64,
}

impl Default for OnsetParams {
    fn default() -> Self {
        Self {
            local_max_secs: 0.05,
            mean_window_secs: 0.3,
            delta: 0.07,
            min_band_rise_db: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TempoParams {
    pub start_bpm: f64,
    /// Width of the log-normal prior, in octaves.
    pub std_octaves: f64,
    /// Longest autocorrelation lag considered.
    pub max_lag_secs: f64,
}

impl Default for TempoParams {
    fn default() -> Self {
        Self {
            start_bpm: 120.0,
            std_octaves: 1.0,
            max_lag_secs: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempoEstimate {
    pub bpm: f64,
    /// Set when the envelope carried no periodicity and the prior centre was
    /// returned.
    pub degenerate: bool,
}

/// Seconds of audio in a (trimmed) clip.
pub fn duration(clip: &AudioClip) -> Result<f64> {
    if clip.is_empty() {
        return Err(Error::EmptyAudio);
    }
    Ok(clip.duration_secs())
}

/// Spectral flux: half-wave rectified frame difference of the dB mel matrix,
/// summed over bands. The first frame has no predecessor and is 0.
pub fn onset_envelope(log_mel: &Array2<f64>) -> Vec<f64> {
    let n_frames = log_mel.ncols();
    let mut env = vec![0.0; n_frames];
    for t in 1..n_frames {
        env[t] = log_mel
            .column(t)
            .iter()
            .zip(log_mel.column(t - 1))
            .map(|(a, b)| (a - b).max(0.0))
            .sum();
    }
    env
}

/// Frame indices of picked onset peaks.
pub fn pick_onsets(env: &[f64], frame_rate: f64, n_bands: usize, p: &OnsetParams) -> Vec<usize> {
    let n = env.len();
    let peak = env.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    let wmax = ((p.local_max_secs * frame_rate).round() as usize).max(1);
    let wavg = (p.mean_window_secs * frame_rate).round() as usize;
    let floor = p.min_band_rise_db * n_bands as f64;
    let threshold = p.delta * peak;
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in env.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }

    (0..n)
        .filter(|&t| {
            let v = env[t];
            if v < floor || v <= threshold {
                return false;
            }
            let lo = t.saturating_sub(wmax);
            let hi = (t + wmax).min(n - 1);
            if (lo..=hi).any(|u| u != t && env[u] >= v) {
                return false;
            }
            let alo = t.saturating_sub(wavg);
            let ahi = (t + wavg + 1).min(n);
            let mean = (prefix[ahi] - prefix[alo]) / (ahi - alo) as f64;
            v >= mean + threshold
        })
        .collect()
}

/// Beats per minute from the prior-weighted autocorrelation of the onset
/// envelope, refined by a parabola through the best lag and its neighbours.
pub fn estimate_tempo(env: &[f64], frame_rate: f64, p: &TempoParams) -> TempoEstimate {
    let fallback = TempoEstimate {
        bpm: p.start_bpm,
        degenerate: true,
    };
    let n = env.len();
    let max_lag = ((p.max_lag_secs * frame_rate).round() as usize).min(n.saturating_sub(1));
    if max_lag < 1 {
        return fallback;
    }
    let bpm_of = |lag: f64| 60.0 * frame_rate / lag;
    let score: Vec<f64> = (0..=max_lag)
        .map(|lag| {
            if lag == 0 {
                return 0.0;
            }
            let ac: f64 = (0..n - lag).map(|t| env[t] * env[t + lag]).sum();
            let octaves = (bpm_of(lag as f64) / p.start_bpm).log2();
            ac * (-0.5 * (octaves / p.std_octaves).powi(2)).exp()
        })
        .collect();
    let (best, best_score) = score
        .iter()
        .enumerate()
        .skip(1)
        .fold((0, 0.0), |a, (i, &s)| if s > a.1 { (i, s) } else { a });
    if best == 0 || best_score <= 0.0 {
        return fallback;
    }
    let mut lag = best as f64;
    if best > 1 && best < max_lag {
        let (a, b, c) = (score[best - 1], score[best], score[best + 1]);
        let curvature = a - 2.0 * b + c;
        if curvature < 0.0 {
            lag += 0.5 * (a - c) / curvature;
        }
    }
    TempoEstimate {
        bpm: bpm_of(lag),
        degenerate: false,
    }
}

/// Frequency of the strongest non-DC bin of the whole-signal FFT. Bins within
/// a relative 1e-9 of the maximum count as tied and the lowest wins.
pub fn dominant_period(clip: &AudioClip) -> Result<f64> {
    if clip.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let n = clip.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut buf: Vec<Complex<f64>> = clip.samples().iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = buf[..=n / 2].iter().map(|c| c.norm()).collect();
    let scale = mags.iter().cloned().fold(0.0, f64::max);
    let best = mags[1..].iter().cloned().fold(0.0, f64::max);
    let tol = 1e-9 * scale;
    let k = 1 + mags[1..].iter().position(|&m| m >= best - tol).unwrap();
    Ok(k as f64 * clip.sample_rate() as f64 / n as f64)
}
