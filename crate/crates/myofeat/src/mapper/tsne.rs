//! Exact t-distributed stochastic neighbor embedding to two dimensions.
//!
//! Exact (all-pairs) gradient; affordable because the point sets here are a
//! few hundred rows. Fixed recipe: 1000 iterations, early exaggeration x12
//! for the first 250, learning rate 200, momentum 0.5 switching to 0.8 at
//! iteration 250, initialization N(0, 1e-4).

use ndarray::Array2;
use rand_distr::{Distribution, Normal};

use super::MapperError;
use crate::dataio::sub_rng;

pub const TSNE_ITERATIONS: usize = 1000;
const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const LEARNING_RATE: f64 = 200.0;
const MOMENTUM_EARLY: f64 = 0.5;
const MOMENTUM_LATE: f64 = 0.8;
const MOMENTUM_SWITCH: usize = 250;
const P_FLOOR: f64 = 1e-12;
const ENTROPY_SEARCH_ITERS: usize = 50;

/// A 2-D embedding with its final objective value.
#[derive(Debug, Clone)]
pub struct Lens {
    /// M x 2 embedding coordinates.
    pub points: Array2<f64>,
    /// Kullback-Leibler divergence of the final (non-exaggerated) fit.
    pub kl_divergence: f64,
}

/// Embeds `points` (M x Z) into the plane.
pub fn tsne_embed(
    points: &Array2<f64>,
    perplexity: f64,
    seed: u64,
    iterations: usize,
) -> Result<Lens, MapperError> {
    let m = points.nrows();
    if m < 5 {
        return Err(MapperError::TooFewPoints { points: m, need: 5 });
    }
    let bound = (m as f64 - 1.0) / 3.0;
    if perplexity >= bound {
        return Err(MapperError::PerplexityTooLarge { perplexity, bound });
    }
    let p = joint_probabilities(points, perplexity);

    let mut rng = sub_rng(seed, &[0x75]);
    let normal = Normal::new(0.0, 1e-2).expect("valid std");
    let mut y = Array2::from_shape_fn((m, 2), |_| normal.sample(&mut rng));
    let mut velocity = Array2::<f64>::zeros((m, 2));

    let mut p_run = p.clone();
    p_run.mapv_inplace(|v| (v * EXAGGERATION).max(P_FLOOR));
    for iter in 0..iterations {
        if iter == EXAGGERATION_ITERS.min(iterations) {
            p_run = p.clone();
        }
        let grad = kl_gradient(&p_run, &y);
        let momentum = if iter < MOMENTUM_SWITCH {
            MOMENTUM_EARLY
        } else {
            MOMENTUM_LATE
        };
        for i in 0..m {
            for c in 0..2 {
                velocity[(i, c)] = momentum * velocity[(i, c)] - LEARNING_RATE * grad[(i, c)];
                y[(i, c)] += velocity[(i, c)];
            }
        }
        // Keep the embedding centered; the objective is translation
        // invariant and this pins the free mode.
        for c in 0..2 {
            let mean = y.column(c).sum() / m as f64;
            y.column_mut(c).mapv_inplace(|v| v - mean);
        }
    }
    let kl = kl_objective(&p, &y);
    Ok(Lens {
        points: y,
        kl_divergence: kl,
    })
}

/// Symmetrized input similarities with per-point bandwidths found by a
/// bisection on the conditional distribution's entropy.
pub fn joint_probabilities(points: &Array2<f64>, perplexity: f64) -> Array2<f64> {
    let m = points.nrows();
    let d2 = squared_distances(points);
    let target_entropy = perplexity.ln();
    let mut cond = Array2::zeros((m, m));
    for i in 0..m {
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0f64;
        for _ in 0..ENTROPY_SEARCH_ITERS {
            let (entropy, row) = row_distribution(&d2, i, beta);
            if entropy > target_entropy {
                // Too spread out: tighten.
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
            for (j, v) in row.iter().enumerate() {
                cond[(i, j)] = *v;
            }
            if (entropy - target_entropy).abs() < 1e-7 {
                break;
            }
        }
    }
    let mut p = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            if i != j {
                p[(i, j)] = ((cond[(i, j)] + cond[(j, i)]) / (2.0 * m as f64)).max(P_FLOOR);
            }
        }
    }
    p
}

fn row_distribution(d2: &Array2<f64>, i: usize, beta: f64) -> (f64, Vec<f64>) {
    let m = d2.nrows();
    let mut row = vec![0.0; m];
    // Shift by the row minimum for numerical stability.
    let min = (0..m)
        .filter(|&j| j != i)
        .map(|j| d2[(i, j)])
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, r) in row.iter_mut().enumerate() {
        if j != i {
            *r = (-beta * (d2[(i, j)] - min)).exp();
            sum += *r;
        }
    }
    let mut entropy = 0.0;
    for (j, r) in row.iter_mut().enumerate() {
        if j != i && sum > 0.0 {
            *r /= sum;
            if *r > 0.0 {
                entropy -= *r * r.ln();
            }
        }
    }
    (entropy, row)
}

fn squared_distances(points: &Array2<f64>) -> Array2<f64> {
    let m = points.nrows();
    let mut d2 = Array2::zeros((m, m));
    for i in 0..m {
        for j in (i + 1)..m {
            let d: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2[(i, j)] = d;
            d2[(j, i)] = d;
        }
    }
    d2
}

/// Student-t affinities of the embedding: unnormalized kernel and its sum.
fn student_kernel(y: &Array2<f64>) -> (Array2<f64>, f64) {
    let m = y.nrows();
    let mut num = Array2::zeros((m, m));
    let mut total = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let d: f64 = (0..2).map(|c| (y[(i, c)] - y[(j, c)]).powi(2)).sum();
            let k = 1.0 / (1.0 + d);
            num[(i, j)] = k;
            num[(j, i)] = k;
            total += 2.0 * k;
        }
    }
    (num, total)
}

/// The Kullback-Leibler objective the optimizer descends.
pub fn kl_objective(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let (num, total) = student_kernel(y);
    let m = y.nrows();
    let mut kl = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j && p[(i, j)] > 0.0 {
                let q = (num[(i, j)] / total).max(P_FLOOR);
                kl += p[(i, j)] * (p[(i, j)] / q).ln();
            }
        }
    }
    kl
}

/// Exact gradient: dC/dy_i = 4 sum_j (p_ij - q_ij) k_ij (y_i - y_j).
pub fn kl_gradient(p: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    let (num, total) = student_kernel(y);
    let m = y.nrows();
    let mut grad = Array2::zeros((m, 2));
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let q = (num[(i, j)] / total).max(P_FLOOR);
            let coeff = 4.0 * (p[(i, j)] - q) * num[(i, j)];
            for c in 0..2 {
                grad[(i, c)] += coeff * (y[(i, c)] - y[(j, c)]);
            }
        }
    }
    grad
}
