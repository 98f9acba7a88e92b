use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Names of the per-series statistics, in vector order.
pub const STAT_NAMES: [&str; 11] = [
    "mean", "median", "rms", "max", "min", "q1", "q3", "iqr", "std", "skewness", "kurtosis",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStatistics {
    pub mean: f64,
    pub median: f64,
    pub rms: f64,
    pub max: f64,
    pub min: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl SummaryStatistics {
    /// Values in [`STAT_NAMES`] order.
    pub fn to_array(&self) -> [f64; 11] {
        [
            self.mean,
            self.median,
            self.rms,
            self.max,
            self.min,
            self.q1,
            self.q3,
            self.iqr,
            self.std,
            self.skewness,
            self.kurtosis,
        ]
    }
}

/// Eleven summary statistics of one descriptor series.
///
/// Moments are the biased (population) estimators; skewness is m3 / m2^1.5 and
/// kurtosis the excess m4 / m2^2 - 3. Quartiles interpolate linearly between
/// order statistics. A series without spread reports zero skewness and
/// kurtosis.
pub fn summarize(values: &[f64]) -> Result<SummaryStatistics> {
    if values.is_empty() {
        return Err(Error::invalid("cannot summarize an empty series"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("descriptor series".into()));
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;

    let scale = sorted[0].abs().max(sorted[sorted.len() - 1].abs());
    // rounding in the mean leaves m2 at ~eps^2 for constant input
    let flat = m2 <= (8.0 * f64::EPSILON * scale).powi(2);
    let (skewness, kurtosis) = if flat {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };

    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    Ok(SummaryStatistics {
        mean,
        median: quantile(&sorted, 0.5),
        rms: (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
        max: sorted[sorted.len() - 1],
        min: sorted[0],
        q1,
        q3,
        iqr: q3 - q1,
        std: if flat { 0.0 } else { m2.sqrt() },
        skewness,
        kurtosis,
    })
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_five_values() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.mean, s.median, s.min, s.max), (3.0, 3.0, 1.0, 5.0));
        assert_eq!((s.q1, s.q3, s.iqr), (2.0, 4.0, 2.0));
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.rms - 11f64.sqrt()).abs() < 1e-15);
        assert!(s.skewness.abs() < 1e-15);
        // m4 / m2^2 - 3 = 6.8 / 4 - 3
        assert!((s.kurtosis + 1.3).abs() < 1e-12);
    }

    #[test]
    fn constant_series_has_no_shape() {
        for c in [0.0, 0.1, -7.25, 1e6] {
            let s = summarize(&[c; 17]).unwrap();
            assert_eq!((s.std, s.skewness, s.kurtosis), (0.0, 0.0, 0.0));
            assert_eq!(s.iqr, 0.0);
        }
    }

    #[test]
    fn skewness_of_three_ones_and_a_nine() {
        // deviations -2,-2,-2,6: m2 = 12, m3 = 48, skew = 48 / 12^1.5
        let s = summarize(&[1.0, 1.0, 1.0, 9.0]).unwrap();
        assert!((s.skewness - 1.154_700_538_379_251_7).abs() < 1e-12);
        assert!((s.skewness - 2.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quartiles_interpolate() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
    }

    #[test]
    fn empty_and_non_finite_rejected() {
        assert!(summarize(&[]).is_err());
        assert!(summarize(&[1.0, f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn order_statistics_are_ordered(v in proptest::collection::vec(-1e3f64..1e3, 1..200)) {
            let s = summarize(&v).unwrap();
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            prop_assert!(s.std >= 0.0);
            prop_assert!((s.iqr - (s.q3 - s.q1)).abs() == 0.0);
            prop_assert!(s.to_array().iter().all(|x| x.is_finite()));
        }
    }
}
