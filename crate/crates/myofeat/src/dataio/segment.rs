//! Sliding-window segmentation of recordings.

use super::{Dataset, Recording, Window, WINDOW_LEN, WINDOW_STEP};
use ndarray::s;

/// Number of windows a recording of `samples` samples yields, if any.
pub fn window_count(samples: usize) -> Option<usize> {
    if samples < WINDOW_LEN {
        None
    } else {
        Some((samples - WINDOW_LEN) / WINDOW_STEP + 1)
    }
}

/// Cuts a recording into windows; window `i` covers samples
/// `[i * WINDOW_STEP, i * WINDOW_STEP + WINDOW_LEN)`.
pub fn segment(rec: &Recording) -> Vec<Window> {
    let count = window_count(rec.len()).expect("recording length is validated on construction");
    (0..count)
        .map(|i| {
            let start = i * WINDOW_STEP;
            Window {
                data: rec
                    .samples
                    .slice(s![.., start..start + WINDOW_LEN])
                    .to_owned(),
                participant: rec.participant,
                gesture: rec.gesture,
                window_index: i as u32,
            }
        })
        .collect()
}

/// Segments every recording, tracking the source cycle per window.
pub fn segment_all(recordings: &[Recording]) -> Dataset {
    let mut out = Dataset::default();
    for rec in recordings {
        for w in segment(rec) {
            out.windows.push(w);
            out.cycles.push(rec.cycle);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{CycleId, GestureId, ParticipantId, CHANNELS};
    use ndarray::Array2;
    use proptest::prelude::*;

    fn rec_with_len(samples: usize) -> Recording {
        let data = Array2::from_shape_fn((CHANNELS, samples), |(c, t)| (c * 10_000 + t) as f64);
        Recording::new(data, ParticipantId(3), CycleId(1), GestureId(5)).unwrap()
    }

    /// Independent count: walk the starts directly.
    fn naive_count(samples: usize) -> usize {
        let mut n = 0;
        let mut start = 0;
        while start + WINDOW_LEN <= samples {
            n += 1;
            start += WINDOW_STEP;
        }
        n
    }

    #[test]
    fn five_second_recording_yields_96_windows() {
        assert_eq!(window_count(5000), Some(96));
        assert_eq!(segment(&rec_with_len(5000)).len(), 96);
    }

    #[test]
    fn too_short_recordings_have_no_windows() {
        assert_eq!(window_count(150), None);
        assert_eq!(window_count(0), None);
    }

    #[test]
    fn windows_tile_the_recording() {
        let rec = rec_with_len(500);
        for (i, w) in segment(&rec).iter().enumerate() {
            assert_eq!(w.window_index as usize, i);
            let start = i * WINDOW_STEP;
            for c in 0..CHANNELS {
                for t in 0..WINDOW_LEN {
                    assert_eq!(w.data[[c, t]], rec.samples[[c, start + t]]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn count_formula_matches_direct_walk(samples in WINDOW_LEN..2000usize) {
            prop_assert_eq!(window_count(samples), Some(naive_count(samples)));
        }
    }
}
