//! Network activations re-expressed as a point cloud.
//!
//! Each of the 6 blocks x 64 maps becomes one row ("B3M17"). The kernel
//! height is 1, so electrode rows never mix inside the trunk; the value of
//! row (b, m) at point (window, channel) is the time-mean of block b's
//! rectified map m along that electrode row, computed in evaluation mode
//! under the window's own domain statistics. Columns therefore line up
//! one-to-one with the handcrafted descriptor cloud.

use ndarray::Array2;
use thiserror::Error;

use super::{conv_forward, bn_forward_fixed, leaky_relu_forward, ConvNet, DomainStatsMap, Params, Real, BLOCKS, MAPS, ROWS};
use crate::dataio::{Dataset, CHANNELS};
use crate::features::{LabeledCloud, PointMeta};

/// Rows of the learned cloud: 6 blocks x 64 maps.
pub const LEARNED_ROWS: usize = BLOCKS * MAPS;

/// Windows evaluated per forward pass.
const CHUNK: usize = 32;

#[derive(Debug, Error)]
pub enum LearnedError {
    #[error("no normalization statistics for participant {0}")]
    MissingDomain(u32),
}

/// Label of the learned row for `(block, map)`, both zero-based.
pub fn learned_label(block: usize, map: usize) -> String {
    format!("B{}M{}", block + 1, map + 1)
}

/// Evaluates the trunk on every window and collects per-row time-means.
///
/// Windows are batched in dataset order, split whenever the participant (and
/// with it the normalization statistics) changes.
pub fn extract_learned<T: Real>(
    net: &ConvNet,
    params: &Params<T>,
    stats: &DomainStatsMap,
    dataset: &Dataset,
) -> Result<LabeledCloud, LearnedError> {
    let n_windows = dataset.windows.len();
    let mut values = Array2::zeros((LEARNED_ROWS, n_windows * CHANNELS));
    let mut points = Vec::with_capacity(n_windows * CHANNELS);
    for (window, cycle) in dataset.windows.iter().zip(&dataset.cycles) {
        for ch in 0..CHANNELS {
            points.push(PointMeta {
                participant: window.participant.0,
                cycle: cycle.0,
                gesture: window.gesture.0,
                window_index: window.window_index as usize,
                channel: ch,
            });
        }
    }

    let mut start = 0;
    while start < n_windows {
        let participant = dataset.windows[start].participant.0;
        let mut end = start + 1;
        while end < n_windows
            && end - start < CHUNK
            && dataset.windows[end].participant.0 == participant
        {
            end += 1;
        }
        let domain = stats
            .get(&participant)
            .ok_or(LearnedError::MissingDomain(participant))?;
        let refs: Vec<&crate::dataio::Window> =
            dataset.windows[start..end].iter().collect();
        let input: Vec<T> = super::windows_to_input(&refs);
        chunk_means(net, params, domain, &input, start, &mut values);
        start = end;
    }

    let labels = (0..LEARNED_ROWS)
        .map(|r| learned_label(r / MAPS, r % MAPS))
        .collect();
    let groups = (0..LEARNED_ROWS).map(|r| format!("B{}", r / MAPS + 1)).collect();
    Ok(LabeledCloud {
        values,
        labels,
        groups,
        points,
    })
}

/// Eval-mode forward over one batch, writing the time-mean of every
/// (block, map, electrode row) into the columns starting at window `w0`.
fn chunk_means<T: Real>(
    net: &ConvNet,
    params: &Params<T>,
    stats: &super::BnStats,
    input: &[T],
    w0: usize,
    values: &mut Array2<f64>,
) {
    let first = &net.layout.blocks[0];
    let batch = input.len() / first.in_len();
    let mut col = vec![
        T::zero();
        net.layout
            .blocks
            .iter()
            .map(|d| d.patch_rows() * d.patch_cols())
            .max()
            .unwrap()
    ];
    let mut x = input.to_vec();
    for (i, dims) in net.layout.blocks.iter().enumerate() {
        let spatial = dims.h * dims.l_out();
        let l_out = dims.l_out();
        let mut conv = vec![T::zero(); batch * dims.out_len()];
        conv_forward(
            dims,
            &x,
            params.seg(net.layout.conv_w(i)),
            params.seg(net.layout.conv_b(i)),
            &mut conv,
            &mut col,
        );
        let mean: Vec<T> = stats.mean[i].iter().map(|&v| T::from_f64(v)).collect();
        let var: Vec<T> = stats.var[i].iter().map(|&v| T::from_f64(v)).collect();
        bn_forward_fixed(
            &mut conv,
            MAPS,
            spatial,
            &mean,
            &var,
            params.seg(net.layout.gamma(i)),
            params.seg(net.layout.beta(i)),
        );
        leaky_relu_forward(&mut conv);
        for b in 0..batch {
            for m in 0..MAPS {
                for h in 0..ROWS {
                    let base = ((b * MAPS + m) * ROWS + h) * l_out;
                    let sum: f64 = conv[base..base + l_out]
                        .iter()
                        .map(|v| v.as_f64())
                        .sum();
                    values[(i * MAPS + m, (w0 + b) * CHANNELS + h)] = sum / l_out as f64;
                }
            }
        }
        x = conv;
    }
}
