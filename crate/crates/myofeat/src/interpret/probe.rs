//! Affine regression probes: how linearly decodable is a handcrafted
//! descriptor from one block's activations?
//!
//! The trunk stays frozen; only a single-output affine head is trained, on
//! the flattened first-channel slice of the block's rectified activations
//! (64 maps x block length). Targets are the descriptor evaluated on the
//! same channel's raw samples; multi-output methods are reduced to their
//! first principal component (fitted on the training split). Inputs and
//! targets are standardized with training-split statistics.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use super::InterpretError;
use crate::convnet::{BnStats, ConvNet, DomainStatsMap, Params, Real, BLOCKS, MAPS};
use crate::dataio::{sub_rng, Dataset};
use crate::features::{extract_method_with, FeatureConfig, Method};
use crate::training::SHARED_DOMAIN;

/// Restarts averaged by the reference protocol.
pub const PROBE_RESTARTS: usize = 20;
/// Optimization cap per restart.
pub const PROBE_EPOCHS: usize = 100;
const PROBE_BATCH: usize = 16;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const PROBE_LR: f64 = 0.040_470_9;

/// One fitted head (weights over the standardized inputs).
#[derive(Debug, Clone)]
pub struct ProbeFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub train_mse: f64,
    pub test_mse: f64,
}

/// Averaged result over restarts for one (block, descriptor) pair.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProbeReport {
    pub block: usize,
    pub target: String,
    pub restarts: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub per_restart_test_mse: Vec<f64>,
}

/// Flattened first-channel activation slice of `block` (1-based) for every
/// window: an `n x (64 * L_b)` matrix in dataset order.
pub fn probe_inputs<T: Real>(
    net: &ConvNet,
    params: &Params<T>,
    stats: &DomainStatsMap,
    data: &Dataset,
    block: usize,
) -> Result<Array2<f64>, InterpretError> {
    if block == 0 || block > BLOCKS {
        return Err(InterpretError::BadBlock(block));
    }
    let b = block - 1;
    let l_out = net.layout.blocks[b].l_out();
    let rows = net.layout.blocks[b].h;
    let dim = MAPS * l_out;
    let mut x = Array2::zeros((data.len(), dim));
    for (w, window) in data.windows.iter().enumerate() {
        let s = stats_of(stats, window.participant.0)?;
        let input: Vec<T> = crate::convnet::windows_to_input(&[window]);
        let trace = net.forward_trace(params, &input, s);
        for m in 0..MAPS {
            let base = (m * rows) * l_out; // channel row 0
            for t in 0..l_out {
                x[(w, m * l_out + t)] = trace.act[b][base + t].as_f64();
            }
        }
    }
    Ok(x)
}

fn stats_of(stats: &DomainStatsMap, participant: u32) -> Result<&BnStats, InterpretError> {
    stats
        .get(&participant)
        .or_else(|| stats.get(&SHARED_DOMAIN))
        .ok_or(InterpretError::MissingStats(participant))
}

/// Descriptor targets on channel 0 of every window; multi-output methods
/// keep all components (reduced later).
fn method_targets(data: &Dataset, method: Method, cfg: &FeatureConfig) -> Vec<Vec<f64>> {
    data.windows
        .iter()
        .map(|w| {
            let row = w.data.row(0);
            let samples = row.as_slice().expect("window rows are contiguous");
            extract_method_with(method, samples, cfg)
        })
        .collect()
}

/// First principal component of multi-output targets, fitted on the training
/// rows only; the sign makes the largest-magnitude loading positive.
fn pc1_scores(targets: &[Vec<f64>], train: &[usize]) -> Vec<f64> {
    let d = targets[0].len();
    if d == 1 {
        return targets.iter().map(|t| t[0]).collect();
    }
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in train {
        for (m, v) in mean.iter_mut().zip(&targets[i]) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = nalgebra::DMatrix::zeros(d, d);
    for &i in train {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (targets[i][a] - mean[a]) * (targets[i][b] - mean[b]);
            }
        }
    }
    cov /= (n - 1.0).max(1.0);
    let eig = nalgebra::SymmetricEigen::new(cov);
    let top = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut axis: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let lead = axis
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    if axis[lead] < 0.0 {
        for v in &mut axis {
            *v = -*v;
        }
    }
    targets
        .iter()
        .map(|t| {
            t.iter()
                .zip(&axis)
                .zip(&mean)
                .map(|((v, a), m)| (v - m) * a)
                .sum()
        })
        .collect()
}

/// Column means/deviations over the training rows; zero-spread columns get a
/// unit deviation so they standardize to a constant zero.
fn column_stats(x: &Array2<f64>, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let d = x.ncols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut sd = vec![0.0; d];
    for &r in rows {
        for (s, (v, m)) in sd.iter_mut().zip(x.row(r).iter().zip(&mean)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut sd {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    (mean, sd)
}

/// Trains the affine head with mini-batch Adam (restarts differ only in
/// initialization and batch order); inputs/targets must already be
/// standardized. Returns the per-restart fits.
pub fn fit_probe(
    x_train: &Array2<f64>,
    y_train: &[f64],
    x_test: &Array2<f64>,
    y_test: &[f64],
    restarts: usize,
    seed: u64,
) -> Vec<ProbeFit> {
    let d = x_train.ncols();
    let n = x_train.nrows();
    (0..restarts)
        .map(|restart| {
            let mut rng = sub_rng(seed, &[0x9b, restart as u64]);
            let bound = 1.0 / (d as f64).sqrt();
            let mut w: Vec<f64> = (0..d).map(|_| rng.gen_range(-bound..bound)).collect();
            let mut b = 0.0f64;
            let (mut mw, mut vw) = (vec![0.0; d], vec![0.0; d]);
            let (mut mb, mut vb) = (0.0f64, 0.0f64);
            let mut t = 0u64;
            let mut order: Vec<usize> = (0..n).collect();
            for _ in 0..PROBE_EPOCHS {
                order.shuffle(&mut rng);
                for chunk in order.chunks(PROBE_BATCH) {
                    t += 1;
                    let mut gw = vec![0.0; d];
                    let mut gb = 0.0;
                    for &r in chunk {
                        let pred: f64 = x_train
                            .row(r)
                            .iter()
                            .zip(&w)
                            .map(|(x, w)| x * w)
                            .sum::<f64>()
                            + b;
                        let err = 2.0 * (pred - y_train[r]) / chunk.len() as f64;
                        for (g, x) in gw.iter_mut().zip(x_train.row(r)) {
                            *g += err * x;
                        }
                        gb += err;
                    }
                    let c1 = 1.0 - ADAM_BETA1.powi(t as i32);
                    let c2 = 1.0 - ADAM_BETA2.powi(t as i32);
                    for i in 0..d {
                        mw[i] = ADAM_BETA1 * mw[i] + (1.0 - ADAM_BETA1) * gw[i];
                        vw[i] = ADAM_BETA2 * vw[i] + (1.0 - ADAM_BETA2) * gw[i] * gw[i];
                        w[i] -= PROBE_LR * (mw[i] / c1) / ((vw[i] / c2).sqrt() + ADAM_EPS);
                    }
                    mb = ADAM_BETA1 * mb + (1.0 - ADAM_BETA1) * gb;
                    vb = ADAM_BETA2 * vb + (1.0 - ADAM_BETA2) * gb * gb;
                    b -= PROBE_LR * (mb / c1) / ((vb / c2).sqrt() + ADAM_EPS);
                }
            }
            let mse = |x: &Array2<f64>, y: &[f64]| {
                let mut acc = 0.0;
                for (r, target) in y.iter().enumerate() {
                    let pred: f64 =
                        x.row(r).iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() + b;
                    acc += (pred - target) * (pred - target);
                }
                acc / y.len().max(1) as f64
            };
            ProbeFit {
                train_mse: mse(x_train, y_train),
                test_mse: mse(x_test, y_test),
                weights: w,
                bias: b,
            }
        })
        .collect()
}

/// Full probe protocol for one (block, method) pair: activations on the
/// first channel, targets on the same channel, fit on training cycles,
/// error on test cycles, averaged over restarts.
#[allow(clippy::too_many_arguments)]
pub fn train_regression_probe<T: Real>(
    net: &ConvNet,
    params: &Params<T>,
    stats: &DomainStatsMap,
    data: &Dataset,
    block: usize,
    method: Method,
    cfg: &FeatureConfig,
    restarts: usize,
    seed: u64,
) -> Result<ProbeReport, InterpretError> {
    let split = data.split();
    if split.train.is_empty() {
        return Err(InterpretError::EmptySplit("training"));
    }
    if split.test.is_empty() {
        return Err(InterpretError::EmptySplit("test"));
    }
    let x = probe_inputs(net, params, stats, data, block)?;
    let targets = method_targets(data, method, cfg);
    let scores = pc1_scores(&targets, &split.train);

    let (x_mean, x_sd) = column_stats(&x, &split.train);
    let n_train = split.train.len();
    let y_mean: f64 = split.train.iter().map(|&i| scores[i]).sum::<f64>() / n_train as f64;
    let y_sd = {
        let v = split
            .train
            .iter()
            .map(|&i| (scores[i] - y_mean).powi(2))
            .sum::<f64>()
            / n_train as f64;
        let s = v.sqrt();
        if s == 0.0 {
            1.0
        } else {
            s
        }
    };
    let standardize = |rows: &[usize]| {
        let mut m = Array2::zeros((rows.len(), x.ncols()));
        let mut y = Vec::with_capacity(rows.len());
        for (out_r, &r) in rows.iter().enumerate() {
            for c in 0..x.ncols() {
                m[(out_r, c)] = (x[(r, c)] - x_mean[c]) / x_sd[c];
            }
            y.push((scores[r] - y_mean) / y_sd);
        }
        (m, y)
    };
    let (x_train, y_train) = standardize(&split.train);
    let (x_test, y_test) = standardize(&split.test);

    let fits = fit_probe(&x_train, &y_train, &x_test, &y_test, restarts, seed);
    let per_restart_test_mse: Vec<f64> = fits.iter().map(|f| f.test_mse).collect();
    Ok(ProbeReport {
        block,
        target: method.name().to_string(),
        restarts,
        train_mse: fits.iter().map(|f| f.train_mse).sum::<f64>() / restarts.max(1) as f64,
        test_mse: per_restart_test_mse.iter().sum::<f64>() / restarts.max(1) as f64,
        per_restart_test_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{CycleId, GestureId, ParticipantId, CHANNELS, WINDOW_LEN};
    use crate::training::estimate_domain_stats;

    fn probe_dataset(n_per_cycle: usize) -> Dataset {
        let mut windows = Vec::new();
        let mut cycles = Vec::new();
        let mut rng = sub_rng(21, &[0x11]);
        for cycle in [1u32, 2, 3, 5, 6] {
            for w in 0..n_per_cycle {
                let data = Array2::from_shape_fn((CHANNELS, WINDOW_LEN), |_| {
                    rng.gen_range(-1.0..1.0)
                });
                windows.push(Window {
                    data,
                    participant: ParticipantId(1),
                    gesture: GestureId((w % 2) as u8),
                    window_index: w as u32,
                });
                cycles.push(CycleId(cycle));
            }
        }
        Dataset { windows, cycles }
    }

    fn shared_stats(net: &ConvNet, params: &Params<f32>, data: &Dataset) -> DomainStatsMap {
        let refs: Vec<&Window> = data.windows.iter().collect();
        let mut map = DomainStatsMap::new();
        map.insert(SHARED_DOMAIN, estimate_domain_stats(net, params, &refs, 0));
        map
    }

    #[test]
    fn inputs_have_block_shapes_and_block_bounds_hold() {
        let net = ConvNet::new();
        let params: Params<f32> = Params::init(&net.layout, 3);
        let data = probe_dataset(2);
        let stats = shared_stats(&net, &params, &data);
        for (block, l) in [(1usize, 126usize), (4, 51), (6, 1)] {
            let x = probe_inputs(&net, &params, &stats, &data, block).unwrap();
            assert_eq!(x.dim(), (data.len(), MAPS * l));
        }
        assert!(matches!(
            probe_inputs(&net, &params, &stats, &data, 0),
            Err(InterpretError::BadBlock(0))
        ));
        assert!(matches!(
            probe_inputs(&net, &params, &stats, &data, 7),
            Err(InterpretError::BadBlock(7))
        ));
    }

    #[test]
    fn constant_target_is_absorbed() {
        // Standardization collapses a constant target to zero; any fit
        // reaches (near-)zero error.
        let net = ConvNet::new();
        let params: Params<f32> = Params::init(&net.layout, 3);
        let data = probe_dataset(4);
        let stats = shared_stats(&net, &params, &data);
        let report = train_regression_probe(
            &net,
            &params,
            &stats,
            &data,
            6,
            Method::Mhw, // 3 outputs; exercises the principal-component path
            &FeatureConfig::default(),
            3,
            7,
        )
        .unwrap();
        // Not constant in general; here we reuse the plumbing on a real
        // method and only check the report's shape.
        assert_eq!(report.per_restart_test_mse.len(), 3);

        // The genuinely constant case, through the head fit directly.
        let x_train = Array2::zeros((8, 4));
        let x_test = Array2::zeros((4, 4));
        let fits = fit_probe(&x_train, &[0.0; 8], &x_test, &[0.0; 4], 2, 1);
        for f in fits {
            assert!(f.test_mse < 1e-6, "constant target: {}", f.test_mse);
        }
    }

    #[test]
    fn linear_target_is_recovered() {
        // Target constructed from the head's own standardized inputs: the
        // optimum is exact, and the optimizer must get within 1e-4.
        let mut rng = sub_rng(5, &[0x77]);
        let n = 48;
        let d = 16;
        let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0f64));
        let coef: Vec<f64> = (0..d).map(|i| ((i % 5) as f64 - 2.0) * 0.3).collect();
        let y: Vec<f64> = (0..n)
            .map(|r| x.row(r).iter().zip(&coef).map(|(a, c)| a * c).sum())
            .collect();
        let x_test = Array2::from_shape_fn((16, d), |_| rng.gen_range(-1.0..1.0f64));
        let y_test: Vec<f64> = (0..16)
            .map(|r| x_test.row(r).iter().zip(&coef).map(|(a, c)| a * c).sum())
            .collect();
        let fits = fit_probe(&x, &y, &x_test, &y_test, 2, 3);
        for f in &fits {
            assert!(f.test_mse <= 1e-4, "test mse {}", f.test_mse);
        }
    }

    #[test]
    fn restarts_differ_but_are_all_reported() {
        let mut rng = sub_rng(6, &[0x78]);
        let x = Array2::from_shape_fn((20, 6), |_| rng.gen_range(-1.0..1.0f64));
        let y: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fits = fit_probe(&x, &y, &x, &y, 4, 11);
        assert_eq!(fits.len(), 4);
        let first = &fits[0].weights;
        assert!(
            fits[1..].iter().any(|f| f.weights != *first),
            "distinct seeds must give distinct trajectories"
        );
    }

    #[test]
    fn probing_never_touches_the_trunk() {
        let net = ConvNet::new();
        let params: Params<f32> = Params::init(&net.layout, 3);
        let before = params.data.clone();
        let data = probe_dataset(2);
        let stats = shared_stats(&net, &params, &data);
        let _ = train_regression_probe(
            &net,
            &params,
            &stats,
            &data,
            6,
            Method::Mav,
            &FeatureConfig::default(),
            2,
            7,
        )
        .unwrap();
        assert_eq!(params.data, before);
    }

    #[test]
    fn principal_component_reduction_is_sign_deterministic() {
        // Strongly correlated 2D targets: the first component is the shared
        // direction, oriented so its largest loading is positive.
        let targets: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let v = i as f64 - 5.5;
                vec![2.0 * v, -v]
            })
            .collect();
        let train: Vec<usize> = (0..12).collect();
        let scores = pc1_scores(&targets, &train);
        // Largest loading belongs to the first coordinate (weight 2), so
        // scores must increase with it.
        assert!(scores.windows(2).all(|w| w[1] > w[0]));
        let again = pc1_scores(&targets, &train);
        assert_eq!(scores, again);
    }
}
