use ndarray::Array2;

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Overlapping analysis frames, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Array2<f64>,
    pub frame_length: usize,
    pub hop_length: usize,
    pub sample_rate: u32,
    pub centered: bool,
}

impl FrameSequence {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }
}

/// Slices a clip into frames of `frame_length` samples every `hop_length`.
///
/// With `center` the signal is reflection-padded by `frame_length / 2` on both
/// ends so frame `t` is centred on sample `t * hop`. Without centering a clip
/// shorter than one frame yields a single zero-padded frame.
pub fn frame_signal(
    clip: &AudioClip,
    frame_length: usize,
    hop_length: usize,
    center: bool,
) -> Result<FrameSequence> {
    if frame_length == 0 || hop_length == 0 {
        return Err(Error::invalid("frame and hop length must be at least 1"));
    }
    if clip.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let x = clip.samples();
    let len = x.len();
    let pad = if center { frame_length / 2 } else { 0 };
    let padded_len = len + 2 * pad;
    let n_frames = if padded_len >= frame_length {
        1 + (padded_len - frame_length) / hop_length
    } else {
        1
    };

    let mut frames = Array2::<f64>::zeros((n_frames, frame_length));
    for (t, mut row) in frames.outer_iter_mut().enumerate() {
        let start = (t * hop_length) as isize - pad as isize;
        for (j, v) in row.iter_mut().enumerate() {
            let i = start + j as isize;
            *v = if center {
                x[reflect_index(i, len)]
            } else if (i as usize) < len {
                x[i as usize]
            } else {
                0.0
            };
        }
    }
    Ok(FrameSequence {
        frames,
        frame_length,
        hop_length,
        sample_rate: clip.sample_rate(),
        centered: center,
    })
}

/// Mirror index without repeating the edge sample (numpy "reflect").
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= len as isize {
        m = period - m;
    }
    m as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> AudioClip {
        AudioClip::new((0..n).map(|i| i as f64).collect(), 100).unwrap()
    }

    #[test]
    fn uncentered_count_formula() {
        let f = frame_signal(&ramp(10), 4, 2, false).unwrap();
        assert_eq!(f.n_frames(), 4);
        assert_eq!(f.frames.row(3).to_vec(), vec![6.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn centered_count_with_padding() {
        // padded length 22050 + 2048; 1 + floor(22050 / 512) = 44
        let clip = AudioClip::new(vec![0.1; 22050], 22050).unwrap();
        let f = frame_signal(&clip, 2048, 512, true).unwrap();
        assert_eq!(f.n_frames(), 1 + (22050 + 2048 - 2048) / 512);
        assert_eq!(f.n_frames(), 44);
    }

    #[test]
    fn reflection_padding_mirrors_edges() {
        let f = frame_signal(&ramp(6), 4, 1, true).unwrap();
        // first frame starts two samples before 0: [2, 1, 0, 1]
        assert_eq!(f.frames.row(0).to_vec(), vec![2.0, 1.0, 0.0, 1.0]);
        let last = f.frames.row(f.n_frames() - 1).to_vec();
        assert_eq!(last, vec![4.0, 5.0, 4.0, 3.0]);
    }

    #[test]
    fn short_clip_uncentered_gets_one_padded_frame() {
        let f = frame_signal(&ramp(3), 8, 4, false).unwrap();
        assert_eq!(f.n_frames(), 1);
        assert_eq!(f.frames.row(0).to_vec(), vec![0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn invalid_arguments() {
        assert!(frame_signal(&ramp(10), 4, 0, false).is_err());
        assert!(frame_signal(&ramp(10), 0, 1, false).is_err());
        let empty = AudioClip::new(vec![], 100).unwrap();
        assert!(matches!(
            frame_signal(&empty, 4, 2, false),
            Err(Error::EmptyAudio)
        ));
    }

    #[test]
    fn reflect_index_handles_long_excursions() {
        let idx: Vec<usize> = (-5..8).map(|i| reflect_index(i, 3)).collect();
        assert_eq!(idx, vec![1, 0, 1, 2, 1, 0, 1, 2, 1, 0, 1, 2, 1]);
    }

    proptest! {
        #[test]
        fn frame_count_formula_holds(len in 1usize..400, frame in 1usize..64, hop in 1usize..64) {
            prop_assume!(hop <= frame && len >= frame);
            let f = frame_signal(&ramp(len), frame, hop, false).unwrap();
            prop_assert_eq!(f.n_frames(), 1 + (len - frame) / hop);
            let last = f.n_frames() - 1;
            prop_assert_eq!(f.frames[[last, frame - 1]], (last * hop + frame - 1) as f64);
        }
    }
}
