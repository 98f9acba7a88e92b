use crate::audio::AudioClip;
use crate::error::{Error, Result};

pub const TRIM_FRAME_LENGTH: usize = 2048;
pub const TRIM_HOP_LENGTH: usize = 512;

/// Output of [`trim_silence`]; `start..end` indexes the input clip.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimResult {
    pub clip: AudioClip,
    pub start: usize,
    pub end: usize,
    pub all_silent: bool,
}

/// Drops leading and trailing audio whose frame RMS lies more than `top_db`
/// below the loudest frame.
///
/// Frames are centred (zero padded), 2048 samples long every 512. The cut is
/// then tightened inside the boundary frame to the first (last) sample whose
/// magnitude reaches the RMS threshold, so the result is accurate to the
/// sample rather than to the frame. A clip whose first and last samples are
/// already above threshold is returned unchanged; a clip with no energy is
/// flagged all-silent.
pub fn trim_silence(clip: &AudioClip, top_db: f64) -> Result<TrimResult> {
    if !(top_db > 0.0) {
        return Err(Error::invalid("top_db must be positive"));
    }
    let x = clip.samples();
    let len = x.len();
    let untouched = |all_silent| TrimResult {
        clip: clip.clone(),
        start: 0,
        end: len,
        all_silent,
    };
    if len == 0 {
        return Ok(untouched(true));
    }

    let rms = frame_rms(x, TRIM_FRAME_LENGTH, TRIM_HOP_LENGTH);
    let peak = rms.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(untouched(true));
    }
    let threshold = peak * 10f64.powf(-top_db / 20.0);
    let loud: Vec<usize> = (0..rms.len()).filter(|&t| rms[t] > threshold).collect();
    let (first, last) = (loud[0], *loud.last().unwrap());
    let half = TRIM_FRAME_LENGTH / 2;

    let lo = (first * TRIM_HOP_LENGTH).saturating_sub(half);
    let start = (lo..len).find(|&i| x[i].abs() >= threshold).unwrap_or(lo);
    let hi = (last * TRIM_HOP_LENGTH + half).min(len);
    let end = (start..hi)
        .rev()
        .find(|&i| x[i].abs() >= threshold)
        .map_or(hi, |i| i + 1);

    Ok(TrimResult {
        clip: AudioClip::new(x[start..end].to_vec(), clip.sample_rate())?,
        start,
        end,
        all_silent: false,
    })
}

/// RMS of centred, zero-padded frames via prefix sums of squares.
fn frame_rms(x: &[f64], frame: usize, hop: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    let n_frames = 1 + x.len() / hop;
    let half = frame / 2;
    (0..n_frames)
        .map(|t| {
            let lo = (t * hop).saturating_sub(half).min(x.len());
            let hi = (t * hop + frame - half).min(x.len());
            ((prefix[hi] - prefix[lo]).max(0.0) / frame as f64).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn padded_sine(sr: u32, pad_s: f64, tone_s: f64) -> AudioClip {
        let pad = (pad_s * sr as f64) as usize;
        let tone = (tone_s * sr as f64) as usize;
        let mut s = vec![0.0; pad];
        s.extend((0..tone).map(|n| (2.0 * PI * 440.0 * n as f64 / sr as f64).sin()));
        s.extend(vec![0.0; pad]);
        AudioClip::new(s, sr).unwrap()
    }

    #[test]
    fn loud_clip_is_unchanged() {
        let clip = AudioClip::new(
            (0..30000).map(|n| (n as f64 * 0.05).cos() * 0.5).collect(),
            22050,
        )
        .unwrap();
        let out = trim_silence(&clip, 60.0).unwrap();
        assert_eq!(out.clip, clip);
        assert!(!out.all_silent);
    }

    #[test]
    fn padded_sine_trims_to_tone_within_one_hop() {
        let clip = padded_sine(22050, 0.5, 1.0);
        let out = trim_silence(&clip, 60.0).unwrap();
        let dur = out.clip.duration_secs();
        assert!((dur - 1.0).abs() <= TRIM_HOP_LENGTH as f64 / 22050.0, "{dur}");
        assert!(out.start.abs_diff(11025) <= TRIM_HOP_LENGTH);
        assert!(out.end.abs_diff(33075) <= TRIM_HOP_LENGTH);
    }

    #[test]
    fn digital_silence_is_flagged() {
        let clip = AudioClip::new(vec![0.0; 5000], 22050).unwrap();
        let out = trim_silence(&clip, 60.0).unwrap();
        assert!(out.all_silent);
        assert_eq!(out.clip, clip);
    }

    #[test]
    fn quiet_tail_below_threshold_is_removed() {
        let mut s: Vec<f64> = (0..20000).map(|n| (n as f64 * 0.1).cos()).collect();
        s.extend(vec![1e-5; 20000]);
        let clip = AudioClip::new(s, 22050).unwrap();
        let out = trim_silence(&clip, 60.0).unwrap();
        assert!(out.end <= 20000 + TRIM_HOP_LENGTH && out.end >= 20000 - TRIM_HOP_LENGTH);
        assert_eq!(out.start, 0);
    }

    #[test]
    fn non_positive_top_db_rejected() {
        let clip = AudioClip::new(vec![0.1; 10], 100).unwrap();
        assert!(trim_silence(&clip, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn trimming_is_idempotent(
            lead in 0usize..8000,
            tail in 0usize..8000,
            burst in proptest::collection::vec((0.2f64..1.0, any::<bool>()), 1..6000),
        ) {
            let mut s = vec![0.0; lead];
            s.extend(burst.iter().map(|&(a, neg)| if neg { -a } else { a }));
            s.extend(vec![0.0; tail]);
            let clip = AudioClip::new(s, 16000).unwrap();
            let once = trim_silence(&clip, 60.0).unwrap();
            let twice = trim_silence(&once.clip, 60.0).unwrap();
            prop_assert_eq!(once.clip.len(), burst.len());
            prop_assert_eq!(&twice.clip, &once.clip);
        }
    }
}
