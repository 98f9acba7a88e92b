use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Fraction of the output Nyquist band kept by the anti-aliasing filter.
const ROLLOFF: f64 = 0.95;
/// Sinc zero crossings on each side of the kernel centre.
const ZERO_CROSSINGS: f64 = 16.0;
const KAISER_BETA: f64 = 8.6;

/// Band-limited resampling with a Kaiser-windowed sinc, evaluated as a
/// polyphase filter over the reduced ratio `target / source`.
///
/// The output has `round(len * target / source)` samples. Equal rates return
/// the input unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::invalid("target sample rate must be positive"));
    }
    let source_rate = clip.sample_rate();
    if source_rate == target_rate {
        return Ok(clip.clone());
    }

    let g = gcd(source_rate as u64, target_rate as u64);
    let up = target_rate as u64 / g;
    let down = source_rate as u64 / g;
    let len = clip.len() as u64;
    let out_len = ((len as u128 * target_rate as u128 + source_rate as u128 / 2)
        / source_rate as u128) as usize;

    let cutoff = ROLLOFF * (target_rate as f64 / source_rate as f64).min(1.0);
    let half_width = (ZERO_CROSSINGS / cutoff).ceil() as i64;
    let taps = (2 * half_width) as usize;

    // phase p covers output positions whose source offset has fraction p/up
    let table: Vec<Vec<f64>> = (0..up)
        .map(|p| {
            let frac = p as f64 / up as f64;
            let mut row: Vec<f64> = (0..taps)
                .map(|t| {
                    let j = t as i64 - half_width + 1;
                    kernel(j as f64 - frac, cutoff, half_width as f64)
                })
                .collect();
            let sum: f64 = row.iter().sum();
            if sum != 0.0 {
                row.iter_mut().for_each(|w| *w /= sum);
            }
            row
        })
        .collect();

    let x = clip.samples();
    let n_in = x.len() as i64;
    let out: Vec<f64> = (0..out_len as u64)
        .map(|n| {
            let pos = n * down;
            let centre = (pos / up) as i64;
            let row = &table[(pos % up) as usize];
            let first = centre - half_width + 1;
            let lo = (-first).max(0) as usize;
            let hi = ((n_in - first).max(0) as usize).min(taps);
            if lo >= hi {
                return 0.0;
            }
            let base = (first + lo as i64) as usize;
            row[lo..hi]
                .iter()
                .zip(&x[base..base + (hi - lo)])
                .map(|(w, s)| w * s)
                .sum()
        })
        .collect();
    AudioClip::new(out, target_rate)
}

fn kernel(t: f64, cutoff: f64, half_width: f64) -> f64 {
    if t.abs() >= half_width {
        return 0.0;
    }
    let arg = std::f64::consts::PI * cutoff * t;
    let sinc = if arg.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
    let u = t / half_width;
    let window = bessel_i0(KAISER_BETA * (1.0 - u * u).max(0.0).sqrt()) / bessel_i0(KAISER_BETA);
    cutoff * sinc * window
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
