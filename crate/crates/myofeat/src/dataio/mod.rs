//! Recording ingestion, band-pass conditioning, windowing, and the synthetic
//! multi-domain surrogate generator.
//!
//! The canonical signal layout is 10 channels sampled at 1000 Hz. Analysis
//! windows are 151 samples long and advance by 51 samples, so a recording of
//! `S` samples yields `(S - 151) / 51 + 1` windows that tile it with 100
//! samples of overlap.

mod filter;
mod load;
mod segment;
mod synth;
mod windows_io;

pub use filter::{BandpassFilter, Biquad, FilterSpec};
pub use load::{load_recordings, parse_recording_name, save_recordings, CsvFormat};
pub use segment::{segment, segment_all, window_count};
pub use synth::{synth_generate, SynthConfig};
pub(crate) use synth::sub_rng;
pub use windows_io::{load_windows, save_windows};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

/// Number of acquisition channels.
pub const CHANNELS: usize = 10;
/// Samples per analysis window (151 ms at 1 kHz).
pub const WINDOW_LEN: usize = 151;
/// Hop between consecutive window starts (100 ms overlap).
pub const WINDOW_STEP: usize = 51;
/// Acquisition rate in Hz.
pub const SAMPLE_RATE_HZ: f64 = 1000.0;
/// Number of valid gesture labels (ids 0..=10).
pub const GESTURE_CLASSES: usize = 11;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("file name {0:?} does not match p<participant>_c<cycle>_g<gesture>.csv")]
    FileName(PathBuf),
    #[error("{file}:{line}: {msg}")]
    Malformed {
        file: PathBuf,
        line: u64,
        msg: String,
    },
    #[error("recording needs at least {min} samples per channel, got {got}")]
    TooShort { got: usize, min: usize },
    #[error("recording needs exactly {want} channel rows, got {got}")]
    ChannelCount { got: usize, want: usize },
    #[error("gesture id {0} outside 0..={}", GESTURE_CLASSES - 1)]
    GestureRange(u32),
    #[error("filter design: {0}")]
    FilterDesign(String),
    #[error("synthetic generator: {0}")]
    SynthConfig(String),
    #[error("window set: {0}")]
    WindowSet(String),
}

/// Identifies one recorded subject; synthetic data reuses it for domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParticipantId(pub u32);

/// Repetition index within the acquisition protocol. Cycles 1-3 are the
/// training split, cycle 4 the validation split, cycles 5 and above the test
/// split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CycleId(pub u32);

/// Gesture class label in `0..=10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GestureId(pub u8);

impl GestureId {
    pub fn new(value: u32) -> Result<Self, DataError> {
        if (value as usize) < GESTURE_CLASSES {
            Ok(GestureId(value as u8))
        } else {
            Err(DataError::GestureRange(value))
        }
    }
}

/// One continuous multi-channel recording of a held gesture.
#[derive(Debug, Clone)]
pub struct Recording {
    /// `CHANNELS x S` sample matrix, `S >= WINDOW_LEN`.
    pub samples: Array2<f64>,
    pub participant: ParticipantId,
    pub cycle: CycleId,
    pub gesture: GestureId,
}

impl Recording {
    pub fn new(
        samples: Array2<f64>,
        participant: ParticipantId,
        cycle: CycleId,
        gesture: GestureId,
    ) -> Result<Self, DataError> {
        if samples.nrows() != CHANNELS {
            return Err(DataError::ChannelCount {
                got: samples.nrows(),
                want: CHANNELS,
            });
        }
        if samples.ncols() < WINDOW_LEN {
            return Err(DataError::TooShort {
                got: samples.ncols(),
                min: WINDOW_LEN,
            });
        }
        Ok(Recording {
            samples,
            participant,
            cycle,
            gesture,
        })
    }

    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One fixed-size analysis window cut from a recording.
#[derive(Debug, Clone)]
pub struct Window {
    /// `CHANNELS x WINDOW_LEN` sample matrix.
    pub data: Array2<f64>,
    pub participant: ParticipantId,
    pub gesture: GestureId,
    /// Position of this window within its source recording.
    pub window_index: u32,
}

/// Windows plus the per-window cycle labels needed for split bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub windows: Vec<Window>,
    pub cycles: Vec<CycleId>,
}

/// Index sets for the cycle-based protocol splits.
#[derive(Debug, Clone, Default)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Sorted unique participant ids present in the set.
    pub fn participants(&self) -> Vec<ParticipantId> {
        let mut ids: Vec<ParticipantId> = self.windows.iter().map(|w| w.participant).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Splits window indices by cycle: 1-3 train, 4 validation, >=5 test.
    pub fn split(&self) -> SplitIndices {
        let mut s = SplitIndices::default();
        for (i, cycle) in self.cycles.iter().enumerate() {
            match cycle.0 {
                0..=3 => s.train.push(i),
                4 => s.val.push(i),
                _ => s.test.push(i),
            }
        }
        s
    }

    /// Window indices belonging to one participant, in dataset order.
    pub fn indices_of(&self, participant: ParticipantId) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.windows[i].participant == participant)
            .collect()
    }

    /// Copies the selected windows (with their cycles) into a new set.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            windows: indices.iter().map(|&i| self.windows[i].clone()).collect(),
            cycles: indices.iter().map(|&i| self.cycles[i]).collect(),
        }
    }
}
