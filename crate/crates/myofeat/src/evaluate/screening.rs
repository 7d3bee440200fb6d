//! Gesture-information screening of descriptors with the linear classifier.
//!
//! Cross-subject protocol: one model is fit on every participant's training
//! cycles (0..=3) and scored on every participant's held-out cycles (5 and
//! up); cycle 4 stays reserved for network validation.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};

use super::lda::{lda_fit, ConfusionMatrix};
use super::EvalError;
use crate::dataio::CHANNELS;
use crate::features::LabeledCloud;

/// Outcome of one screening run.
#[derive(Debug, Clone)]
pub struct FeatureEval {
    pub label: String,
    pub group: String,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Group accuracy next to the spread of its members' single accuracies.
#[derive(Debug, Clone)]
pub struct GroupSummary {
    pub name: String,
    pub group_accuracy: f64,
    pub single_mean: f64,
    pub single_std: f64,
    pub members: usize,
}

#[derive(Debug, Clone)]
pub struct ScreeningReport {
    pub singles: Vec<FeatureEval>,
    pub groups: Vec<GroupSummary>,
}

/// Per-window metadata recovered from the cloud's per-point records.
struct WindowTable {
    cycles: Vec<u32>,
    gestures: Vec<usize>,
}

fn window_table(cloud: &LabeledCloud) -> WindowTable {
    let n_points = cloud.n_points();
    assert_eq!(n_points % CHANNELS, 0, "points come in channel decades");
    let n_windows = n_points / CHANNELS;
    let mut cycles = Vec::with_capacity(n_windows);
    let mut gestures = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let meta = &cloud.points[w * CHANNELS];
        cycles.push(meta.cycle);
        gestures.push(meta.gesture as usize);
    }
    WindowTable { cycles, gestures }
}

/// Stacks the chosen rows into per-window inputs: window `w` maps to the
/// concatenation of each row's 10 channel values.
fn window_matrix(cloud: &LabeledCloud, rows: &[usize]) -> Array2<f64> {
    let n_windows = cloud.n_points() / CHANNELS;
    let d = rows.len() * CHANNELS;
    Array2::from_shape_fn((n_windows, d), |(w, j)| {
        let row = rows[j / CHANNELS];
        let ch = j % CHANNELS;
        cloud.values[(row, w * CHANNELS + ch)]
    })
}

fn split_windows(table: &WindowTable) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (w, &cycle) in table.cycles.iter().enumerate() {
        match cycle {
            0..=3 => train.push(w),
            4 => {}
            _ => test.push(w),
        }
    }
    if train.is_empty() {
        return Err(EvalError::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(EvalError::EmptySplit("test"));
    }
    Ok((train, test))
}

fn fit_and_score(
    input: &Array2<f64>,
    table: &WindowTable,
) -> Result<(f64, ConfusionMatrix), EvalError> {
    let (train, test) = split_windows(table)?;
    let x_train = input.select(ndarray::Axis(0), &train);
    let y_train: Vec<usize> = train.iter().map(|&w| table.gestures[w]).collect();
    let model = lda_fit(x_train.view(), &y_train)?;
    let x_test = input.select(ndarray::Axis(0), &test);
    let y_test: Vec<usize> = test.iter().map(|&w| table.gestures[w]).collect();
    let predicted = model.predict(x_test.view())?;
    let classes = table
        .gestures
        .iter()
        .copied()
        .max()
        .map_or(0, |m| m + 1)
        .max(model.classes());
    let confusion = ConfusionMatrix::from_pairs(&y_test, &predicted, classes);
    Ok((confusion.accuracy(), confusion))
}

/// Screens one descriptor row: inputs are its 10 per-channel values.
pub fn eval_single_feature(
    cloud: &LabeledCloud,
    row: usize,
) -> Result<FeatureEval, EvalError> {
    assert!(row < cloud.n_rows(), "descriptor row out of range");
    let table = window_table(cloud);
    let input = window_matrix(cloud, &[row]);
    let (accuracy, confusion) = fit_and_score(&input, &table)?;
    Ok(FeatureEval {
        label: cloud.labels[row].clone(),
        group: cloud.groups[row].clone(),
        accuracy,
        confusion,
    })
}

/// Screens one row through its first principal component: the projection
/// axis is fit on training windows only, then applied everywhere, giving a
/// one-dimensional input.  Used for learned feature maps.
pub fn eval_single_feature_pc1(
    cloud: &LabeledCloud,
    row: usize,
) -> Result<FeatureEval, EvalError> {
    assert!(row < cloud.n_rows(), "descriptor row out of range");
    let table = window_table(cloud);
    let wide = window_matrix(cloud, &[row]);
    let (train, _) = split_windows(&table)?;

    let mut mean = Array1::<f64>::zeros(CHANNELS);
    for &w in &train {
        mean += &wide.row(w);
    }
    mean /= train.len() as f64;
    let mut cov = DMatrix::<f64>::zeros(CHANNELS, CHANNELS);
    for &w in &train {
        for i in 0..CHANNELS {
            for j in 0..CHANNELS {
                cov[(i, j)] += (wide[(w, i)] - mean[i]) * (wide[(w, j)] - mean[j]);
            }
        }
    }
    cov /= (train.len().max(2) - 1) as f64;
    let eigen = SymmetricEigen::new(cov);
    let mut top = 0;
    for k in 1..CHANNELS {
        if eigen.eigenvalues[k] > eigen.eigenvalues[top] {
            top = k;
        }
    }
    let mut axis: Vec<f64> = (0..CHANNELS).map(|i| eigen.eigenvectors[(i, top)]).collect();
    // Deterministic orientation: the largest-magnitude loading is positive.
    let lead = (0..CHANNELS)
        .max_by(|&a, &b| axis[a].abs().partial_cmp(&axis[b].abs()).unwrap())
        .unwrap();
    if axis[lead] < 0.0 {
        for v in &mut axis {
            *v = -*v;
        }
    }

    let n_windows = wide.nrows();
    let input = Array2::from_shape_fn((n_windows, 1), |(w, _)| {
        (0..CHANNELS)
            .map(|ch| (wide[(w, ch)] - mean[ch]) * axis[ch])
            .sum()
    });
    let (accuracy, confusion) = fit_and_score(&input, &table)?;
    Ok(FeatureEval {
        label: cloud.labels[row].clone(),
        group: cloud.groups[row].clone(),
        accuracy,
        confusion,
    })
}

/// Screens a whole descriptor group: inputs concatenate every member row's
/// channel values.
pub fn eval_feature_group(
    cloud: &LabeledCloud,
    group: &str,
) -> Result<FeatureEval, EvalError> {
    let rows: Vec<usize> = (0..cloud.n_rows())
        .filter(|&r| cloud.groups[r] == group)
        .collect();
    if rows.is_empty() {
        return Err(EvalError::EmptySubset);
    }
    let table = window_table(cloud);
    let input = window_matrix(cloud, &rows);
    let (accuracy, confusion) = fit_and_score(&input, &table)?;
    Ok(FeatureEval {
        label: group.to_string(),
        group: group.to_string(),
        accuracy,
        confusion,
    })
}

/// Runs the full table: every row singly (optionally through PC1) and every
/// group jointly, with per-group mean and spread of the single accuracies.
pub fn screen_features(
    cloud: &LabeledCloud,
    pc1_singles: bool,
) -> Result<ScreeningReport, EvalError> {
    if cloud.n_rows() == 0 {
        return Err(EvalError::EmptySubset);
    }
    let mut singles = Vec::with_capacity(cloud.n_rows());
    for row in 0..cloud.n_rows() {
        let eval = if pc1_singles {
            eval_single_feature_pc1(cloud, row)?
        } else {
            eval_single_feature(cloud, row)?
        };
        singles.push(eval);
    }
    let mut group_names: Vec<String> = Vec::new();
    for g in &cloud.groups {
        if !group_names.contains(g) {
            group_names.push(g.clone());
        }
    }
    let mut groups = Vec::with_capacity(group_names.len());
    for name in group_names {
        let joint = eval_feature_group(cloud, &name)?;
        let acc: Vec<f64> = singles
            .iter()
            .filter(|e| e.group == name)
            .map(|e| e.accuracy)
            .collect();
        let mean = acc.iter().sum::<f64>() / acc.len() as f64;
        let std = if acc.len() > 1 {
            (acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
                / (acc.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        groups.push(GroupSummary {
            name,
            group_accuracy: joint.accuracy,
            single_mean: mean,
            single_std: std,
            members: acc.len(),
        });
    }
    Ok(ScreeningReport { singles, groups })
}

/// Writes the report as one table: single rows first, then group rows with
/// the member statistics filled in.
pub fn save_screening_csv(report: &ScreeningReport, path: &Path) -> Result<(), EvalError> {
    let io_err = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(file, "kind,label,group,accuracy,single_mean,single_std,members")?;
        for e in &report.singles {
            writeln!(file, "single,{},{},{},,,", e.label, e.group, e.accuracy)?;
        }
        for g in &report.groups {
            writeln!(
                file,
                "group,{},{},{},{},{},{}",
                g.name, g.name, g.group_accuracy, g.single_mean, g.single_std, g.members
            )?;
        }
        Ok(())
    };
    emit().map_err(io_err)
}
