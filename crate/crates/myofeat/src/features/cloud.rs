//! Assembly of per-window descriptors into a descriptor-by-point matrix.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::methods::Ctx;
use super::{methods, registry, Descriptor, FeatureConfig, DESCRIPTOR_COUNT};
use crate::dataio::{DataError, Dataset, CHANNELS};

/// Identity of one point (column) of the cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointMeta {
    pub participant: u32,
    pub cycle: u32,
    pub gesture: u8,
    /// Ordinal of the window within its recording.
    pub window_index: usize,
    pub channel: usize,
}

/// All descriptors evaluated on all channels of all windows.
///
/// `values` is `79 x (windows * 10)`: rows follow the registry order, columns
/// are window-major, channel-minor (`col = window * 10 + channel`). Raw
/// values are kept; standardization is applied on demand.
#[derive(Debug, Clone)]
pub struct FeaturePointCloud {
    pub values: Array2<f64>,
    pub descriptors: Vec<Descriptor>,
    pub points: Vec<PointMeta>,
}

/// Evaluates the full registry on every channel of every window.
///
/// Non-finite results (possible only through pathological inputs such as
/// overflowing powers) are replaced by zero and counted in a single warning.
pub fn extract_all(dataset: &Dataset, cfg: &FeatureConfig) -> FeaturePointCloud {
    let descriptors = registry();
    let n_windows = dataset.windows.len();
    let n_points = n_windows * CHANNELS;
    // Windows are independent, and each lands in its own column block, so the
    // result cannot depend on the thread count.
    let blocks: Vec<(Vec<f64>, usize)> = dataset
        .windows
        .par_iter()
        .map(|window| {
            let mut block = vec![0.0; DESCRIPTOR_COUNT * CHANNELS];
            let mut non_finite = 0usize;
            for ch in 0..CHANNELS {
                let row_data = window.data.row(ch);
                let samples = row_data.as_slice().expect("window rows are contiguous");
                let ctx = Ctx::new(samples);
                let mut row = 0;
                for method in super::Method::ALL {
                    for v in methods::compute(method, &ctx, cfg) {
                        block[row * CHANNELS + ch] = if v.is_finite() {
                            v
                        } else {
                            non_finite += 1;
                            0.0
                        };
                        row += 1;
                    }
                }
                debug_assert_eq!(row, DESCRIPTOR_COUNT);
            }
            (block, non_finite)
        })
        .collect();
    let mut values = Array2::zeros((DESCRIPTOR_COUNT, n_points));
    let mut points = Vec::with_capacity(n_points);
    let mut non_finite = 0usize;
    for (w, ((window, cycle), (block, nf))) in dataset
        .windows
        .iter()
        .zip(&dataset.cycles)
        .zip(&blocks)
        .enumerate()
    {
        non_finite += nf;
        for ch in 0..CHANNELS {
            points.push(PointMeta {
                participant: window.participant.0,
                cycle: cycle.0,
                gesture: window.gesture.0,
                window_index: window.window_index as usize,
                channel: ch,
            });
        }
        for row in 0..DESCRIPTOR_COUNT {
            for ch in 0..CHANNELS {
                values[(row, w * CHANNELS + ch)] = block[row * CHANNELS + ch];
            }
        }
    }
    if non_finite > 0 {
        log::warn!("replaced {non_finite} non-finite descriptor values with 0");
    }
    FeaturePointCloud {
        values,
        descriptors,
        points,
    }
}

impl FeaturePointCloud {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Row index of a descriptor by its export label, e.g. `"MAV"`, `"AR2"`.
    pub fn row_of(&self, label: &str) -> Option<usize> {
        self.descriptors
            .iter()
            .position(|d| d.label().eq_ignore_ascii_case(label))
    }

    /// Per-row z-scored copy; rows with zero spread become all-zero.
    pub fn standardized(&self) -> Array2<f64> {
        zscore_rows(&self.values)
    }

    /// Collects the 10 per-channel values of one descriptor for window `w`.
    pub fn window_vector(&self, row: usize, window: usize) -> Vec<f64> {
        (0..CHANNELS)
            .map(|ch| self.values[(row, window * CHANNELS + ch)])
            .collect()
    }

    /// Row labels and group names in a source-agnostic container, sharing the
    /// point columns. Rows from other extractors (e.g. network activations)
    /// can then be stacked on top for joint analyses.
    pub fn to_labeled(&self) -> LabeledCloud {
        LabeledCloud {
            values: self.values.clone(),
            labels: self.descriptors.iter().map(|d| d.label()).collect(),
            groups: self
                .descriptors
                .iter()
                .map(|d| d.group().name().to_string())
                .collect(),
            points: self.points.clone(),
        }
    }

    /// Writes the matrix as CSV (rows = descriptors, columns = points) plus a
    /// JSON sidecar describing rows and points.
    pub fn save(&self, csv_path: &Path) -> Result<(), DataError> {
        self.to_labeled().save(csv_path)
    }
}

/// A row-labeled point cloud independent of where its rows came from.
///
/// Same column layout as [`FeaturePointCloud`]: one column per
/// (window, channel) pair, window-major. `labels` and `groups` run parallel
/// to the rows of `values`.
#[derive(Debug, Clone)]
pub struct LabeledCloud {
    pub values: Array2<f64>,
    pub labels: Vec<String>,
    pub groups: Vec<String>,
    pub points: Vec<PointMeta>,
}

impl LabeledCloud {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row_of(&self, label: &str) -> Option<usize> {
        self.labels
            .iter()
            .position(|l| l.eq_ignore_ascii_case(label))
    }

    /// Per-row z-scored copy; rows with zero spread become all-zero.
    pub fn standardized(&self) -> Array2<f64> {
        zscore_rows(&self.values)
    }

    /// Collects the 10 per-channel values of one row for window `w`.
    pub fn window_vector(&self, row: usize, window: usize) -> Vec<f64> {
        (0..CHANNELS)
            .map(|ch| self.values[(row, window * CHANNELS + ch)])
            .collect()
    }

    /// Stacks another cloud's rows below this one. Both must describe the
    /// same points in the same order.
    pub fn vstack(&self, bottom: &LabeledCloud) -> LabeledCloud {
        assert_eq!(self.points, bottom.points, "clouds describe different points");
        let values = ndarray::concatenate(
            Axis(0),
            &[self.values.view(), bottom.values.view()],
        )
        .expect("equal column counts");
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&bottom.labels);
        let mut groups = self.groups.clone();
        groups.extend_from_slice(&bottom.groups);
        LabeledCloud {
            values,
            labels,
            groups,
            points: self.points.clone(),
        }
    }

    /// Writes the matrix as CSV (rows = features, columns = points) plus a
    /// JSON sidecar describing rows and points.
    pub fn save(&self, csv_path: &Path) -> Result<(), DataError> {
        let io_err = |e: std::io::Error| DataError::Io {
            path: csv_path.to_path_buf(),
            source: e,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(csv_path).map_err(io_err)?);
        let mut header = vec!["descriptor".to_string(), "group".to_string()];
        header.extend(self.points.iter().map(|p| {
            format!(
                "p{}_c{}_g{}_w{}_ch{}",
                p.participant, p.cycle, p.gesture, p.window_index, p.channel
            )
        }));
        writeln!(out, "{}", header.join(",")).map_err(io_err)?;
        for i in 0..self.n_rows() {
            let mut fields = vec![self.labels[i].clone(), self.groups[i].clone()];
            fields.extend(self.values.row(i).iter().map(|v| format!("{v}")));
            writeln!(out, "{}", fields.join(",")).map_err(io_err)?;
        }
        out.flush().map_err(io_err)?;

        let sidecar = Sidecar {
            rows: (0..self.n_rows())
                .map(|i| RowMeta {
                    label: self.labels[i].clone(),
                    group: self.groups[i].clone(),
                })
                .collect(),
            points: self.points.clone(),
        };
        let json_path = csv_path.with_extension("json");
        let file = std::fs::File::create(&json_path).map_err(|e| DataError::Io {
            path: json_path.clone(),
            source: e,
        })?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &sidecar).map_err(|e| {
            DataError::Io {
                path: json_path,
                source: std::io::Error::new(std::io::ErrorKind::Other, e),
            }
        })?;
        Ok(())
    }

    /// Reads a cloud written by [`LabeledCloud::save`]: the value matrix
    /// from the CSV and row/point metadata from the JSON sidecar.
    pub fn load(csv_path: &Path) -> Result<LabeledCloud, DataError> {
        let json_path = csv_path.with_extension("json");
        let file = std::fs::File::open(&json_path).map_err(|e| DataError::Io {
            path: json_path.clone(),
            source: e,
        })?;
        let sidecar: Sidecar = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| DataError::Malformed {
                file: json_path.clone(),
                line: 0,
                msg: format!("sidecar: {e}"),
            })?;
        let malformed = |line: u64, msg: String| DataError::Malformed {
            file: csv_path.to_path_buf(),
            line,
            msg,
        };
        let text = std::fs::read_to_string(csv_path).map_err(|e| DataError::Io {
            path: csv_path.to_path_buf(),
            source: e,
        })?;
        let mut lines = text.lines();
        lines
            .next()
            .ok_or_else(|| malformed(1, "empty cloud file".into()))?;
        let n_points = sidecar.points.len();
        let n_rows = sidecar.rows.len();
        let mut values = Array2::zeros((n_rows, n_points));
        let mut row = 0usize;
        for (lineno, line) in lines.enumerate() {
            let lineno = lineno as u64 + 2;
            if row >= n_rows {
                return Err(malformed(lineno, format!("more than {n_rows} rows")));
            }
            let mut fields = line.split(',');
            let label = fields
                .next()
                .ok_or_else(|| malformed(lineno, "missing label".into()))?;
            let group = fields
                .next()
                .ok_or_else(|| malformed(lineno, "missing group".into()))?;
            if label != sidecar.rows[row].label || group != sidecar.rows[row].group {
                return Err(malformed(
                    lineno,
                    format!("row {row} does not match the sidecar metadata"),
                ));
            }
            for col in 0..n_points {
                let cell = fields.next().ok_or_else(|| {
                    malformed(lineno, format!("expected {n_points} values, got {col}"))
                })?;
                values[(row, col)] = cell
                    .parse()
                    .map_err(|e| malformed(lineno, format!("column {col}: {e}")))?;
            }
            if fields.next().is_some() {
                return Err(malformed(lineno, format!("more than {n_points} values")));
            }
            row += 1;
        }
        if row != n_rows {
            return Err(malformed(0, format!("expected {n_rows} rows, got {row}")));
        }
        Ok(LabeledCloud {
            values,
            labels: sidecar.rows.iter().map(|r| r.label.clone()).collect(),
            groups: sidecar.rows.iter().map(|r| r.group.clone()).collect(),
            points: sidecar.points,
        })
    }
}

/// Z-scores each row; rows with zero spread become all-zero.
fn zscore_rows(values: &Array2<f64>) -> Array2<f64> {
    let mut out = values.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let n = row.len() as f64;
        if n == 0.0 {
            continue;
        }
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 0.0 {
            row.mapv_inplace(|v| (v - mean) / sd);
        } else {
            row.fill(0.0);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct RowMeta {
    label: String,
    group: String,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    rows: Vec<RowMeta>,
    points: Vec<PointMeta>,
}
