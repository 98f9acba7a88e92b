use crate::audio::{FrameSequence, Spectrogram};

/// One per-frame descriptor track.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSeries {
    pub name: String,
    pub values: Vec<f64>,
}

impl DescriptorSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

/// Square root of the mean squared magnitude of each frame.
pub fn rms_energy_series(spec: &Spectrogram) -> DescriptorSeries {
    let n_bins = spec.n_bins() as f64;
    let values = spec
        .magnitudes
        .columns()
        .into_iter()
        .map(|col| (col.iter().map(|m| m * m).sum::<f64>() / n_bins).sqrt())
        .collect();
    DescriptorSeries::new("rms", values)
}

/// Magnitude-weighted mean frequency; 0 for a silent frame.
pub fn spectral_centroid_series(spec: &Spectrogram) -> DescriptorSeries {
    let values = spec
        .magnitudes
        .columns()
        .into_iter()
        .map(|col| {
            let total: f64 = col.sum();
            if total <= 0.0 {
                return 0.0;
            }
            col.iter()
                .zip(&spec.bin_frequencies)
                .map(|(m, f)| m * f)
                .sum::<f64>()
                / total
        })
        .collect();
    DescriptorSeries::new("centroid", values)
}

/// Lowest bin frequency whose cumulative power reaches `pct` of the frame's
/// total; 0 for a silent frame.
pub fn rolloff_series(spec: &Spectrogram, pct: f64) -> DescriptorSeries {
    let values = spec
        .magnitudes
        .columns()
        .into_iter()
        .map(|col| {
            let total: f64 = col.iter().map(|m| m * m).sum();
            if total <= 0.0 {
                return 0.0;
            }
            let target = pct * total;
            let mut acc = 0.0;
            for (m, &f) in col.iter().zip(&spec.bin_frequencies) {
                acc += m * m;
                if acc >= target {
                    return f;
                }
            }
            *spec.bin_frequencies.last().unwrap()
        })
        .collect();
    DescriptorSeries::new("rolloff", values)
}

/// Sign changes between adjacent samples over the frame length. Zero counts
/// as positive.
pub fn zcr_series(frames: &FrameSequence) -> DescriptorSeries {
    let len = frames.frame_length as f64;
    let values = frames
        .frames
        .outer_iter()
        .map(|row| {
            let crossings = row
                .iter()
                .zip(row.iter().skip(1))
                .filter(|(a, b)| (**a >= 0.0) != (**b >= 0.0))
                .count();
            crossings as f64 / len
        })
        .collect();
    DescriptorSeries::new("zcr", values)
}
