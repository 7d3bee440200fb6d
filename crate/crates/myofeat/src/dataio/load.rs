//! Recording CSV ingestion and emission.
//!
//! Recordings live one per file as `p<participant>_c<cycle>_g<gesture>.csv`
//! with one sample per row and one column per channel. A single header row is
//! tolerated and auto-detected.

use super::{CycleId, DataError, GestureId, ParticipantId, Recording, CHANNELS};
use ndarray::Array2;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Declares the on-disk CSV layout.
#[derive(Debug, Clone, Copy)]
pub struct CsvFormat {
    pub channels: usize,
    pub delimiter: u8,
    /// `None` auto-detects a single leading header row.
    pub has_header: Option<bool>,
}

impl Default for CsvFormat {
    fn default() -> Self {
        CsvFormat {
            channels: CHANNELS,
            delimiter: b',',
            has_header: None,
        }
    }
}

/// Parses `p<participant>_c<cycle>_g<gesture>` from a file stem.
pub fn parse_recording_name(stem: &str) -> Option<(u32, u32, u32)> {
    let rest = stem.strip_prefix('p')?;
    let (p, rest) = rest.split_once("_c")?;
    let (c, g) = rest.split_once("_g")?;
    Some((p.parse().ok()?, c.parse().ok()?, g.parse().ok()?))
}

/// Loads every `*.csv` recording under `dir`, sorted by file name.
///
/// An empty directory yields an empty list with a logged warning. A `.csv`
/// file whose name does not match the layout is an error; other extensions
/// are ignored.
pub fn load_recordings(dir: &Path, fmt: &CsvFormat) -> Result<Vec<Recording>, DataError> {
    let io_err = |source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err)?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
        .collect();
    files.sort();

    if files.is_empty() {
        log::warn!("no recording CSVs found in {}", dir.display());
        return Ok(Vec::new());
    }

    files.iter().map(|path| load_one(path, fmt)).collect()
}

fn load_one(path: &Path, fmt: &CsvFormat) -> Result<Recording, DataError> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| DataError::FileName(path.to_path_buf()))?;
    let (p, c, g) =
        parse_recording_name(stem).ok_or_else(|| DataError::FileName(path.to_path_buf()))?;
    let gesture = GestureId::new(g)?;

    let malformed = |line: u64, msg: String| DataError::Malformed {
        file: path.to_path_buf(),
        line,
        msg,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(fmt.delimiter)
        .flexible(true)
        .from_path(path)
        .map_err(|e| DataError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            malformed(
                e.position().map(|p| p.line()).unwrap_or(idx as u64 + 1),
                e.to_string(),
            )
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(idx as u64 + 1);
        if idx == 0 && fmt.has_header == Some(true) {
            continue;
        }
        let parsed: Result<Vec<f64>, usize> = record
            .iter()
            .enumerate()
            .map(|(col, field)| field.trim().parse::<f64>().map_err(|_| col))
            .collect();
        match parsed {
            Ok(values) => {
                if values.len() != fmt.channels {
                    return Err(malformed(
                        line,
                        format!("expected {} channel columns, got {}", fmt.channels, values.len()),
                    ));
                }
                rows.push(values);
            }
            Err(col) => {
                // Auto-detection treats only the first unparsable row as a header.
                if idx == 0 && fmt.has_header.is_none() {
                    continue;
                }
                return Err(malformed(
                    line,
                    format!("column {} is not numeric: {:?}", col + 1, record.get(col)),
                ));
            }
        }
    }

    if rows.len() < super::WINDOW_LEN {
        return Err(malformed(
            rows.len() as u64,
            format!(
                "only {} sample rows, need at least {}",
                rows.len(),
                super::WINDOW_LEN
            ),
        ));
    }

    // Samples arrive row-per-time; recordings store channel-per-row.
    let mut samples = Array2::zeros((fmt.channels, rows.len()));
    for (t, row) in rows.iter().enumerate() {
        for (ch, v) in row.iter().enumerate() {
            samples[[ch, t]] = *v;
        }
    }
    Recording::new(samples, ParticipantId(p), CycleId(c), gesture)
}

/// Writes recordings as `p<p>_c<c>_g<g>.csv`, one sample per row.
pub fn save_recordings(recordings: &[Recording], dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::with_capacity(recordings.len());
    for rec in recordings {
        let path = dir.join(format!(
            "p{}_c{}_g{}.csv",
            rec.participant.0, rec.cycle.0, rec.gesture.0
        ));
        let io_err = |source| DataError::Io {
            path: path.clone(),
            source,
        };
        let mut out = std::io::BufWriter::new(fs::File::create(&path).map_err(io_err)?);
        for t in 0..rec.len() {
            let mut line = String::new();
            for c in 0..rec.samples.nrows() {
                if c > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{}", rec.samples[[c, t]]));
            }
            line.push('\n');
            out.write_all(line.as_bytes()).map_err(io_err)?;
        }
        out.flush().map_err(io_err)?;
        written.push(path);
    }
    Ok(written)
}
