use ndarray::{Array2, Axis};

use crate::audio::MelSpectrogram;
use crate::error::{Error, Result};

pub const LOG_FLOOR: f64 = 1e-10;
pub const TOP_DB: f64 = 80.0;

/// Mel power in decibels, floored at `LOG_FLOOR` and clipped to `TOP_DB`
/// below the loudest cell.
pub fn log_mel_db(mel: &MelSpectrogram) -> Array2<f64> {
    let mut db = mel.energies.mapv(|e| 10.0 * e.max(LOG_FLOOR).log10());
    let peak = db.iter().cloned().fold(f64::MIN, f64::max);
    db.mapv_inplace(|v| v.max(peak - TOP_DB));
    db
}

/// Orthonormal DCT-II basis, `(n_coeffs, n)`.
pub fn dct_matrix(n_coeffs: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n_coeffs, n), |(k, b)| {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        scale * (std::f64::consts::PI * k as f64 * (b as f64 + 0.5) / n as f64).cos()
    })
}

/// First `n_mfcc` cepstral coefficients of every frame of a log-mel matrix.
/// Returns `(n_mfcc, n_frames)`.
pub fn mfcc_series(log_mel: &Array2<f64>, n_mfcc: usize) -> Result<Array2<f64>> {
    let n_mels = log_mel.nrows();
    if n_mfcc == 0 || n_mfcc > n_mels {
        return Err(Error::invalid(format!(
            "n_mfcc must be in 1..={n_mels}, got {n_mfcc}"
        )));
    }
    Ok(dct_matrix(n_mfcc, n_mels).dot(log_mel))
}

/// Local regression slope over a `width`-frame window, edges replicated.
/// Applied `order` times along the frame axis of `(rows, n_frames)`.
pub fn delta(series: &Array2<f64>, width: usize, order: usize) -> Result<Array2<f64>> {
    if width < 3 || width % 2 == 0 {
        return Err(Error::invalid(format!("delta width must be odd and >= 3, got {width}")));
    }
    let half = (width / 2) as isize;
    let denom: f64 = 2.0 * (1..=half).map(|n| (n * n) as f64).sum::<f64>();
    let mut current = series.clone();
    for _ in 0..order {
        let n_frames = current.ncols() as isize;
        let mut out = Array2::zeros(current.raw_dim());
        for (row_in, mut row_out) in current.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            let at = |t: isize| row_in[t.clamp(0, n_frames - 1) as usize];
            for t in 0..n_frames {
                let num: f64 = (1..=half).map(|n| n as f64 * (at(t + n) - at(t - n))).sum();
                row_out[t as usize] = num / denom;
            }
        }
        current = out;
    }
    Ok(current)
}
