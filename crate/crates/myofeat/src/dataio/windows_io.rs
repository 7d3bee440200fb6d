//! On-disk window block: a little-endian f32 sample blob plus a JSON index
//! of per-window labels.

use super::{
    CycleId, DataError, Dataset, GestureId, ParticipantId, Window, CHANNELS, SAMPLE_RATE_HZ,
    WINDOW_LEN,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const WINDOWS_BIN: &str = "windows.bin";
pub const WINDOWS_INDEX: &str = "windows.json";

#[derive(Debug, Serialize, Deserialize)]
struct WindowsIndex {
    sample_rate_hz: f64,
    channels: usize,
    window_len: usize,
    entries: Vec<IndexEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    participant: u32,
    cycle: u32,
    gesture: u32,
    window_index: u32,
}

/// Writes `windows.bin` (window-major, channel-major, time-minor f32) and
/// `windows.json` next to it.
pub fn save_windows(dataset: &Dataset, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let bin_path = dir.join(WINDOWS_BIN);
    let io_err = |path: &PathBuf| {
        let path = path.clone();
        move |source| DataError::Io {
            path: path.clone(),
            source,
        }
    };

    let mut blob = Vec::with_capacity(dataset.len() * CHANNELS * WINDOW_LEN * 4);
    for w in &dataset.windows {
        for c in 0..CHANNELS {
            for t in 0..WINDOW_LEN {
                blob.extend_from_slice(&(w.data[[c, t]] as f32).to_le_bytes());
            }
        }
    }
    let mut f = fs::File::create(&bin_path).map_err(io_err(&bin_path))?;
    f.write_all(&blob).map_err(io_err(&bin_path))?;

    let index = WindowsIndex {
        sample_rate_hz: SAMPLE_RATE_HZ,
        channels: CHANNELS,
        window_len: WINDOW_LEN,
        entries: dataset
            .windows
            .iter()
            .zip(&dataset.cycles)
            .map(|(w, cycle)| IndexEntry {
                participant: w.participant.0,
                cycle: cycle.0,
                gesture: w.gesture.0 as u32,
                window_index: w.window_index,
            })
            .collect(),
    };
    let json_path = dir.join(WINDOWS_INDEX);
    let body = serde_json::to_vec_pretty(&index).expect("index serializes");
    fs::write(&json_path, body).map_err(io_err(&json_path))?;
    Ok(())
}

/// Loads a window block written by [`save_windows`].
pub fn load_windows(dir: &Path) -> Result<Dataset, DataError> {
    let json_path = dir.join(WINDOWS_INDEX);
    let body = fs::read_to_string(&json_path).map_err(|source| DataError::Io {
        path: json_path.clone(),
        source,
    })?;
    let index: WindowsIndex = serde_json::from_str(&body).map_err(|e| DataError::Malformed {
        file: json_path.clone(),
        line: e.line() as u64,
        msg: e.to_string(),
    })?;
    if index.channels != CHANNELS || index.window_len != WINDOW_LEN {
        return Err(DataError::WindowSet(format!(
            "index declares {}x{} windows, expected {}x{}",
            index.channels, index.window_len, CHANNELS, WINDOW_LEN
        )));
    }

    let bin_path = dir.join(WINDOWS_BIN);
    let mut blob = Vec::new();
    fs::File::open(&bin_path)
        .and_then(|mut f| f.read_to_end(&mut blob))
        .map_err(|source| DataError::Io {
            path: bin_path.clone(),
            source,
        })?;
    let expected = index.entries.len() * CHANNELS * WINDOW_LEN * 4;
    if blob.len() != expected {
        return Err(DataError::WindowSet(format!(
            "sample blob is {} bytes, index implies {}",
            blob.len(),
            expected
        )));
    }

    let mut dataset = Dataset::default();
    let mut offset = 0;
    for entry in &index.entries {
        let mut data = Array2::zeros((CHANNELS, WINDOW_LEN));
        for c in 0..CHANNELS {
            for t in 0..WINDOW_LEN {
                let bytes: [u8; 4] = blob[offset..offset + 4].try_into().unwrap();
                data[[c, t]] = f32::from_le_bytes(bytes) as f64;
                offset += 4;
            }
        }
        dataset.windows.push(Window {
            data,
            participant: ParticipantId(entry.participant),
            gesture: GestureId::new(entry.gesture)?,
            window_index: entry.window_index,
        });
        dataset.cycles.push(CycleId(entry.cycle));
    }
    Ok(dataset)
}
