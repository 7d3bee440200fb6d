//! Attribution maps: guided backpropagation, coarse class-activation maps at
//! the last block, and their point-wise fusion.

use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use super::InterpretError;
use crate::convnet::{
    col2im_add, gemm, windows_to_input, BnStats, ConvNet, EvalTrace, Params, Real, BLOCKS,
    BN_EPS, FLATTEN, GESTURE_OUT, LEAKY_SLOPE, MAPS, ROWS,
};
use crate::dataio::{Window, WINDOW_LEN};

/// Fused relevance of one window for one gesture: non-negative, zero
/// wherever the guided gradient and the class-activation map disagree in
/// sign support.
#[derive(Debug, Clone)]
pub struct RelevanceMap {
    /// 10 x 151, non-negative.
    pub values: Array2<f64>,
    pub gesture: usize,
    /// Ordinal of the source window in its set.
    pub window: usize,
}

enum Gating {
    /// True derivative: the leak slope where the unit was non-positive.
    Plain,
    /// Zero where the unit was non-positive, zero where the incoming
    /// gradient is negative.
    Guided,
}

/// Gradient of the gesture logit with respect to the input window under the
/// true (leaky) derivative.
pub fn input_gradient<T: Real>(
    net: &ConvNet,
    params: &Params<T>,
    stats: &BnStats,
    window: &Window,
    gesture: usize,
) -> Result<Array2<f64>, InterpretError> {
    let trace = trace_window(net, params, stats, window);
    backward_to_input(net, params, stats, &trace, gesture, Gating::Plain)
}

/// Guided backpropagation: at every rectification the gradient passes only
/// through units that were active *and* only where it is itself positive.
pub fn guided_backprop<T: Real>(
    net: &ConvNet,
    params: &Params<T>,
    stats: &BnStats,
    window: &Window,
    gesture: usize,
) -> Result<Array2<f64>, InterpretError> {
    let trace = trace_window(net, params, stats, window);
    backward_to_input(net, params, stats, &trace, gesture, Gating::Guided)
}

/// Coarse class-activation map at the last block's rectified output.
///
/// The head is affine on the flattened 64 x 10 x 1 activations, so the
/// gradient of the gesture logit with respect to map `m` at row `h` is the
/// head weight itself; pooling it over the 10 x 1 spatial extent gives one
/// weight per map, and the map is `relu(sum_m w_m F_m)` per row — a 10 x 1
/// profile over electrode rows.
pub fn grad_cam<T: Real>(
    net: &ConvNet,
    params: &Params<T>,
    stats: &BnStats,
    window: &Window,
    gesture: usize,
) -> Result<Vec<f64>, InterpretError> {
    if gesture >= GESTURE_OUT {
        return Err(InterpretError::BadGesture(gesture));
    }
    let trace = trace_window(net, params, stats, window);
    Ok(cam_from_trace(params, net, &trace, gesture))
}

/// Guided Grad-CAM: the 10 x 1 map broadcast along the time axis, multiplied
/// point-wise with the positive part of the guided gradient.
pub fn guided_grad_cam<T: Real>(
    net: &ConvNet,
    params: &Params<T>,
    stats: &BnStats,
    window: &Window,
    window_id: usize,
    gesture: usize,
) -> Result<RelevanceMap, InterpretError> {
    if gesture >= GESTURE_OUT {
        return Err(InterpretError::BadGesture(gesture));
    }
    let trace = trace_window(net, params, stats, window);
    let cam = cam_from_trace(params, net, &trace, gesture);
    let guided = backward_to_input(net, params, stats, &trace, gesture, Gating::Guided)?;
    let values = Array2::from_shape_fn((ROWS, WINDOW_LEN), |(h, t)| {
        cam[h] * guided[(h, t)].max(0.0)
    });
    Ok(RelevanceMap {
        values,
        gesture,
        window: window_id,
    })
}

fn trace_window<T: Real>(
    net: &ConvNet,
    params: &Params<T>,
    stats: &BnStats,
    window: &Window,
) -> EvalTrace<T> {
    let input: Vec<T> = windows_to_input(&[window]);
    net.forward_trace(params, &input, stats)
}

fn cam_from_trace<T: Real>(
    params: &Params<T>,
    net: &ConvNet,
    trace: &EvalTrace<T>,
    gesture: usize,
) -> Vec<f64> {
    let head = params.seg(net.layout.gesture_w());
    let row = &head[gesture * FLATTEN..(gesture + 1) * FLATTEN];
    let act = trace.flatten();
    let mut cam = vec![0.0f64; ROWS];
    for m in 0..MAPS {
        // Pool the logit gradient over the (10 x 1) spatial extent.
        let w: f64 = (0..ROWS).map(|h| row[m * ROWS + h].as_f64()).sum::<f64>() / ROWS as f64;
        for (h, c) in cam.iter_mut().enumerate() {
            *c += w * act[m * ROWS + h].as_f64();
        }
    }
    for c in &mut cam {
        *c = c.max(0.0);
    }
    cam
}

/// Walks the gradient of one gesture logit back to the input, applying the
/// chosen gating at every rectification. Evaluation-mode normalization is a
/// fixed per-channel affine map, so its backward is a scale.
fn backward_to_input<T: Real>(
    net: &ConvNet,
    params: &Params<T>,
    stats: &BnStats,
    trace: &EvalTrace<T>,
    gesture: usize,
    gating: Gating,
) -> Result<Array2<f64>, InterpretError> {
    if gesture >= GESTURE_OUT {
        return Err(InterpretError::BadGesture(gesture));
    }
    let head = params.seg(net.layout.gesture_w());
    let mut g: Vec<T> = head[gesture * FLATTEN..(gesture + 1) * FLATTEN].to_vec();
    let mut col = vec![
        T::zero();
        net.layout
            .blocks
            .iter()
            .map(|d| d.patch_rows() * d.patch_cols())
            .max()
            .unwrap()
    ];
    for i in (0..BLOCKS).rev() {
        let dims = &net.layout.blocks[i];
        let spatial = dims.h * dims.l_out();
        // The leak keeps the sign: the unit was active iff its output is
        // positive.
        let act = &trace.act[i];
        match gating {
            Gating::Plain => {
                let slope = T::from_f64(LEAKY_SLOPE);
                for (gv, a) in g.iter_mut().zip(act) {
                    if *a <= T::zero() {
                        *gv *= slope;
                    }
                }
            }
            Gating::Guided => {
                for (gv, a) in g.iter_mut().zip(act) {
                    if *a <= T::zero() || *gv < T::zero() {
                        *gv = T::zero();
                    }
                }
            }
        }
        // Fixed-statistics normalization backward: scale per map.
        let gamma = params.seg(net.layout.gamma(i));
        for m in 0..MAPS {
            let scale = gamma[m].as_f64() / (stats.var[i][m] + BN_EPS).sqrt();
            let scale = T::from_f64(scale);
            for gv in &mut g[m * spatial..(m + 1) * spatial] {
                *gv *= scale;
            }
        }
        // Convolution backward to the block input.
        let weights = params.seg(net.layout.conv_w(i));
        let cols = dims.patch_cols();
        let col = &mut col[..dims.patch_rows() * cols];
        gemm(
            dims.patch_rows(),
            cols,
            dims.c_out,
            T::one(),
            weights,
            true,
            &g,
            false,
            T::zero(),
            col,
        );
        let mut d_in = vec![T::zero(); dims.in_len()];
        col2im_add(dims, col, &mut d_in);
        g = d_in;
    }
    debug_assert_eq!(g.len(), ROWS * WINDOW_LEN);
    Ok(Array2::from_shape_fn((ROWS, WINDOW_LEN), |(h, t)| {
        g[h * WINDOW_LEN + t].as_f64()
    }))
}

#[derive(Serialize)]
struct RelevanceCell {
    channel: usize,
    time: usize,
    value: f64,
    /// Absent where the value is zero (log undefined); renderers use a
    /// logarithmic color scale.
    log10_value: Option<f64>,
}

/// Writes the 10 x 151 map as CSV, one row per channel.
pub fn save_relevance_csv(map: &RelevanceMap, path: &Path) -> Result<(), InterpretError> {
    let io_err = |source: std::io::Error| InterpretError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for row in map.values.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

/// Writes the map as rendering-ready JSON cells with log-scaled values.
pub fn save_relevance_json(map: &RelevanceMap, path: &Path) -> Result<(), InterpretError> {
    let cells: Vec<RelevanceCell> = map
        .values
        .indexed_iter()
        .map(|((channel, time), &value)| RelevanceCell {
            channel,
            time,
            value,
            log10_value: (value > 0.0).then(|| value.log10()),
        })
        .collect();
    let file = std::fs::File::create(path).map_err(|source| InterpretError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::to_writer(std::io::BufWriter::new(file), &cells).map_err(|e| {
        InterpretError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e),
        }
    })?;
    Ok(())
}
