use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::FrameSequence;
use crate::error::{Error, Result};

/// Magnitude spectrogram, `(n_bins, n_frames)` with `n_bins = fft_size / 2 + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    pub bin_frequencies: Vec<f64>,
    pub frame_times: Vec<f64>,
    pub sample_rate: u32,
    pub fft_size: usize,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.magnitudes.ncols()
    }
}

/// Periodic Hann window (the DFT-even variant used for spectral analysis).
pub fn hann_window(length: usize) -> Vec<f64> {
    (0..length)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / length as f64).cos())
        .collect()
}

/// Hann-windowed FFT magnitude of every frame. When `fft_size` exceeds the
/// frame length the windowed frame is zero-padded symmetrically.
pub fn stft(frames: &FrameSequence, fft_size: usize) -> Result<Spectrogram> {
    let frame_length = frames.frame_length;
    if fft_size < frame_length || !fft_size.is_power_of_two() {
        return Err(Error::invalid(format!(
            "fft size {fft_size} must be a power of two no smaller than the frame ({frame_length})"
        )));
    }
    let window = hann_window(frame_length);
    let offset = (fft_size - frame_length) / 2;
    let n_bins = fft_size / 2 + 1;
    let n_frames = frames.n_frames();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);

    let mut magnitudes = Array2::<f64>::zeros((n_bins, n_frames));
    let mut buffer = vec![Complex::new(0.0, 0.0); fft_size];
    for (t, frame) in frames.frames.outer_iter().enumerate() {
        buffer.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (j, (&x, &w)) in frame.iter().zip(&window).enumerate() {
            buffer[offset + j].re = x * w;
        }
        fft.process(&mut buffer);
        for k in 0..n_bins {
            magnitudes[[k, t]] = buffer[k].norm();
        }
    }

    let sr = frames.sample_rate as f64;
    let bin_frequencies = (0..n_bins).map(|k| k as f64 * sr / fft_size as f64).collect();
    // centred frames sit on t * hop; uncentred ones on their midpoint
    let shift = if frames.centered {
        0.0
    } else {
        frame_length as f64 / 2.0
    };
    let frame_times = (0..n_frames)
        .map(|t| (t as f64 * frames.hop_length as f64 + shift) / sr)
        .collect();
    Ok(Spectrogram {
        magnitudes,
        bin_frequencies,
        frame_times,
        sample_rate: frames.sample_rate,
        fft_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{frame_signal, AudioClip};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn frames_of(samples: Vec<f64>, sr: u32, frame: usize, hop: usize) -> FrameSequence {
        frame_signal(&AudioClip::new(samples, sr).unwrap(), frame, hop, true).unwrap()
    }

    #[test]
    fn zero_frames_give_zero_magnitudes() {
        let f = frames_of(vec![0.0; 4096], 8000, 1024, 256);
        let s = stft(&f, 1024).unwrap();
        assert_eq!(s.n_bins(), 513);
        assert!(s.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn bin_centred_sine_peaks_at_its_bin() {
        let (sr, n, k) = (8192u32, 1024usize, 37usize);
        let f0 = k as f64 * sr as f64 / n as f64;
        let x = (0..8192).map(|i| (2.0 * PI * f0 * i as f64 / sr as f64).sin()).collect();
        let clip = AudioClip::new(x, sr).unwrap();
        let s = stft(&frame_signal(&clip, n, 256, false).unwrap(), n).unwrap();
        assert_eq!(s.bin_frequencies[k], f0);
        for col in s.magnitudes.columns() {
            let argmax = col
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a })
                .0;
            assert_eq!(argmax, k);
        }
    }

    #[test]
    fn parseval_against_time_domain_energy() {
        let n = 512;
        let x: Vec<f64> = (0..3000).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let f = frames_of(x, 16000, n, 128);
        let s = stft(&f, n).unwrap();
        let w = hann_window(n);
        for (t, frame) in f.frames.outer_iter().enumerate() {
            let energy: f64 = frame.iter().zip(&w).map(|(x, w)| (x * w).powi(2)).sum();
            let col = s.magnitudes.column(t);
            // one-sided spectrum: interior bins stand for two conjugate bins
            let spectral: f64 = col[0].powi(2)
                + col[n / 2].powi(2)
                + 2.0 * col.iter().skip(1).take(n / 2 - 1).map(|m| m * m).sum::<f64>();
            assert!((spectral - n as f64 * energy).abs() <= 1e-6 * n as f64 * energy);
        }
    }

    #[test]
    fn fft_size_validation() {
        let f = frames_of(vec![0.1; 100], 8000, 64, 16);
        assert!(stft(&f, 32).is_err());
        assert!(stft(&f, 96).is_err());
        assert_eq!(stft(&f, 128).unwrap().n_bins(), 65);
    }

    proptest! {
        #[test]
        fn magnitudes_ignore_global_sign(x in proptest::collection::vec(-1.0f64..1.0, 64..400)) {
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let a = stft(&frames_of(x, 8000, 64, 16), 64).unwrap();
            let b = stft(&frames_of(neg, 8000, 64, 16), 64).unwrap();
            for (p, q) in a.magnitudes.iter().zip(b.magnitudes.iter()) {
                prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
            }
        }
    }
}
