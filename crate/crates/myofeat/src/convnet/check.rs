//! Finite-difference validation of the analytic gradients.
//!
//! The network is evaluated in f64 with fixed dropout masks, so central
//! differences measure the true derivative of the deterministic loss. Head
//! parameters are checked against their own loss pieces and trunk parameters
//! against the adversarial composite (gesture loss minus the weighted domain
//! loss), which exercises the gradient-reversal wiring end to end.

use rand::Rng;

use super::model::ConvNet;
use super::ops::softmax_cross_entropy;
use super::{Params, SegmentRole, DOMAIN_OUT, GESTURE_OUT, ROWS};
use crate::dataio::{sub_rng, WINDOW_LEN};

/// Symmetric relative error with an absolute floor for near-zero pairs.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Central difference of a scalar function at `x0`.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x0: f64, h: f64) -> f64 {
    (f(x0 + h) - f(x0 - h)) / (2.0 * h)
}

/// Worst relative error of one parameter segment.
#[derive(Debug, Clone)]
pub struct SegmentCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub segments: Vec<SegmentCheck>,
    pub max_rel_err: f64,
}

struct Problem {
    net: ConvNet,
    input: Vec<f64>,
    gesture_labels: Vec<usize>,
    domain_labels: Vec<usize>,
    dropout_p: f64,
    dropout_seed: u64,
    lambda: f64,
}

impl Problem {
    fn new(seed: u64, batch: usize, dropout_p: f64, lambda: f64) -> Self {
        let mut rng = sub_rng(seed, &[0xfd]);
        let input: Vec<f64> = (0..batch * ROWS * WINDOW_LEN)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let gesture_labels: Vec<usize> =
            (0..batch).map(|_| rng.gen_range(0..GESTURE_OUT)).collect();
        let domain_labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..DOMAIN_OUT)).collect();
        Problem {
            net: ConvNet::new(),
            input,
            gesture_labels,
            domain_labels,
            dropout_p,
            dropout_seed: seed ^ 0xd20,
            lambda,
        }
    }

    /// Gesture and domain losses under fixed dropout masks.
    fn losses(&self, params: &Params<f64>) -> (f64, f64) {
        let cache =
            self.net
                .forward_train(params, self.input.clone(), self.dropout_p, self.dropout_seed);
        let mut dg = vec![0.0; cache.gesture_logits.len()];
        let mut dd = vec![0.0; cache.domain_logits.len()];
        let ly = softmax_cross_entropy(&cache.gesture_logits, &self.gesture_labels, GESTURE_OUT, &mut dg);
        let ld = softmax_cross_entropy(&cache.domain_logits, &self.domain_labels, DOMAIN_OUT, &mut dd);
        (ly, ld)
    }

    /// Analytic gradients of the adversarial objective.
    fn analytic(&self, params: &Params<f64>) -> Params<f64> {
        let cache =
            self.net
                .forward_train(params, self.input.clone(), self.dropout_p, self.dropout_seed);
        let mut dg = vec![0.0; cache.gesture_logits.len()];
        let mut dd = vec![0.0; cache.domain_logits.len()];
        softmax_cross_entropy(&cache.gesture_logits, &self.gesture_labels, GESTURE_OUT, &mut dg);
        softmax_cross_entropy(&cache.domain_logits, &self.domain_labels, DOMAIN_OUT, &mut dd);
        let dd_head: Vec<f64> = dd.iter().map(|v| self.lambda * v).collect();
        let dd_trunk: Vec<f64> = dd.iter().map(|v| -self.lambda * v).collect();
        self.net.backward(params, &cache, &dg, &dd_head, &dd_trunk)
    }

    /// The scalar each parameter's gradient is defined against.
    fn objective(&self, params: &Params<f64>, role: SegmentRole) -> f64 {
        let (ly, ld) = self.losses(params);
        match role {
            SegmentRole::Trunk => ly - self.lambda * ld,
            SegmentRole::GestureHead => ly,
            SegmentRole::DomainHead => self.lambda * ld,
        }
    }
}

/// Compares sampled analytic gradients with central differences over every
/// parameter segment. `per_segment` indices are taken evenly from each
/// segment; all arithmetic is f64.
pub fn check_network_gradients(
    seed: u64,
    batch: usize,
    per_segment: usize,
    lambda: f64,
) -> GradCheckReport {
    let problem = Problem::new(seed, batch, 0.35, lambda);
    let layout = problem.net.layout.clone();
    let params: Params<f64> = Params::init(&layout, seed);
    let analytic = problem.analytic(&params);
    let mut segments = Vec::new();
    let mut overall = 0.0f64;
    for (name, range) in layout.segments() {
        let role = layout.segment_role(&name);
        let len = range.len();
        let n = per_segment.min(len);
        let mut worst = 0.0f64;
        for j in 0..n {
            let idx = range.start + j * len / n;
            let x0 = params.data[idx];
            let h = 1e-5 * x0.abs().max(1.0);
            let fd = central_diff(
                |v| {
                    let mut p = params.clone();
                    p.data[idx] = v;
                    problem.objective(&p, role)
                },
                x0,
                h,
            );
            let a = analytic.data[idx];
            // Conv biases feed straight into normalization, so their true
            // gradient is identically zero; below finite-difference
            // resolution only the absolute scale is meaningful.
            if fd.abs() > 1e-7 || a.abs() > 1e-7 {
                worst = worst.max(rel_err(fd, a));
            }
        }
        overall = overall.max(worst);
        segments.push(SegmentCheck {
            name,
            max_rel_err: worst,
            checked: n,
        });
    }
    GradCheckReport {
        segments,
        max_rel_err: overall,
    }
}

/// Verifies the reversal wiring by linearity: the full backward must equal
/// the sum of its gesture, domain-head, and negated domain-trunk pieces.
pub fn reversal_identity_max_err(seed: u64, batch: usize, lambda: f64) -> f64 {
    let problem = Problem::new(seed, batch, 0.35, lambda);
    let params: Params<f64> = Params::init(&problem.net.layout, seed);
    let cache = problem.net.forward_train(
        &params,
        problem.input.clone(),
        problem.dropout_p,
        problem.dropout_seed,
    );
    let mut dg = vec![0.0; cache.gesture_logits.len()];
    let mut dd = vec![0.0; cache.domain_logits.len()];
    softmax_cross_entropy(&cache.gesture_logits, &problem.gesture_labels, GESTURE_OUT, &mut dg);
    softmax_cross_entropy(&cache.domain_logits, &problem.domain_labels, DOMAIN_OUT, &mut dd);
    let zero_g = vec![0.0; dg.len()];
    let zero_d = vec![0.0; dd.len()];
    let dd_head: Vec<f64> = dd.iter().map(|v| lambda * v).collect();
    let dd_trunk: Vec<f64> = dd.iter().map(|v| -lambda * v).collect();

    let full = problem.net.backward(&params, &cache, &dg, &dd_head, &dd_trunk);
    let gesture_only = problem.net.backward(&params, &cache, &dg, &zero_d, &zero_d);
    let head_only = problem.net.backward(&params, &cache, &zero_g, &dd, &zero_d);
    let trunk_only = problem.net.backward(&params, &cache, &zero_g, &zero_d, &dd);

    let mut max_err = 0.0f64;
    for i in 0..full.data.len() {
        let composed =
            gesture_only.data[i] + lambda * head_only.data[i] - lambda * trunk_only.data[i];
        max_err = max_err.max((full.data[i] - composed).abs());
    }
    max_err
}

#[cfg(test)]
mod tests {
    use super::super::ops::*;
    use super::*;
    use crate::dataio::sub_rng;

    /// Exhaustive FD over a parameter slice against analytic gradients.
    fn assert_grads<F>(x: &mut [f64], analytic: &[f64], mut f: F, tol: f64)
    where
        F: FnMut(&[f64]) -> f64,
    {
        for i in 0..x.len() {
            let x0 = x[i];
            let h = 1e-6 * x0.abs().max(1.0);
            x[i] = x0 + h;
            let fp = f(x);
            x[i] = x0 - h;
            let fm = f(x);
            x[i] = x0;
            let fd = (fp - fm) / (2.0 * h);
            let err = rel_err(fd, analytic[i]);
            assert!(err < tol, "index {i}: fd {fd} vs analytic {}", analytic[i]);
        }
    }

    fn randn(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = sub_rng(seed, &[0xcafe]);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let dims = ConvDims {
            c_in: 2,
            c_out: 3,
            k: 3,
            h: 2,
            l_in: 6,
        };
        let batch = 2;
        let mut input = randn(batch * dims.in_len(), 1);
        let mut weights = randn(dims.c_out * dims.patch_rows(), 2);
        let mut bias = randn(dims.c_out, 3);
        let proj = randn(batch * dims.out_len(), 4);
        let loss = |inp: &[f64], w: &[f64], b: &[f64]| -> f64 {
            let mut out = vec![0.0; batch * dims.out_len()];
            let mut col = vec![0.0; dims.patch_rows() * dims.patch_cols()];
            conv_forward(&dims, inp, w, b, &mut out, &mut col);
            out.iter().zip(&proj).map(|(o, p)| o * p).sum()
        };
        let mut dw = vec![0.0; weights.len()];
        let mut db = vec![0.0; bias.len()];
        let mut dx = vec![0.0; input.len()];
        let mut col = vec![0.0; dims.patch_rows() * dims.patch_cols()];
        conv_backward(
            &dims,
            &input,
            &weights,
            &proj,
            &mut dw,
            &mut db,
            Some(&mut dx),
            &mut col,
        );
        let (i0, w0, b0) = (input.clone(), weights.clone(), bias.clone());
        assert_grads(&mut weights, &dw, |w| loss(&i0, w, &b0), 1e-6);
        assert_grads(&mut bias, &db, |b| loss(&i0, &w0, b), 1e-6);
        assert_grads(&mut input, &dx, |i| loss(i, &w0, &b0), 1e-6);
    }

    #[test]
    fn bn_gradients_flow_through_batch_statistics() {
        let channels = 3;
        let spatial = 4;
        let batch = 2;
        let len = batch * channels * spatial;
        let mut x = randn(len, 10);
        let mut gamma = randn(channels, 11).iter().map(|v| 1.0 + 0.2 * v).collect::<Vec<_>>();
        let mut beta = randn(channels, 12);
        let proj = randn(len, 13);
        let loss = |x: &[f64], g: &[f64], b: &[f64]| -> f64 {
            let (mean, var) = batch_stats(x, channels, spatial);
            let mut xhat = vec![0.0; x.len()];
            let mut y = vec![0.0; x.len()];
            bn_forward(x, channels, spatial, &mean, &var, g, b, &mut xhat, &mut y);
            y.iter().zip(&proj).map(|(a, p)| a * p).sum()
        };
        let (mean, var) = batch_stats(&x, channels, spatial);
        let mut xhat = vec![0.0; len];
        let mut y = vec![0.0; len];
        bn_forward(&x, channels, spatial, &mean, &var, &gamma, &beta, &mut xhat, &mut y);
        let mut dg = vec![0.0; channels];
        let mut db = vec![0.0; channels];
        let mut dx = vec![0.0; len];
        bn_backward(&proj, &xhat, channels, spatial, &var, &gamma, &mut dg, &mut db, &mut dx);
        let (x0, g0, b0) = (x.clone(), gamma.clone(), beta.clone());
        assert_grads(&mut x, &dx, |x| loss(x, &g0, &b0), 1e-5);
        assert_grads(&mut gamma, &dg, |g| loss(&x0, g, &b0), 1e-6);
        assert_grads(&mut beta, &db, |b| loss(&x0, &g0, b), 1e-6);
    }

    #[test]
    fn affine_gradients_match_finite_differences() {
        let (in_dim, out_dim, batch) = (5, 3, 4);
        let mut x = randn(batch * in_dim, 20);
        let mut w = randn(out_dim * in_dim, 21);
        let mut b = randn(out_dim, 22);
        let proj = randn(batch * out_dim, 23);
        let loss = |x: &[f64], w: &[f64], b: &[f64]| -> f64 {
            let mut out = vec![0.0; batch * out_dim];
            affine_forward(x, w, b, in_dim, out_dim, &mut out);
            out.iter().zip(&proj).map(|(o, p)| o * p).sum()
        };
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; b.len()];
        let mut dx = vec![0.0; x.len()];
        affine_backward(&x, &w, &proj, in_dim, out_dim, &mut dw, &mut db, Some(&mut dx));
        let (x0, w0, b0) = (x.clone(), w.clone(), b.clone());
        assert_grads(&mut w, &dw, |w| loss(&x0, w, &b0), 1e-7);
        assert_grads(&mut b, &db, |b| loss(&x0, &w0, b), 1e-7);
        assert_grads(&mut x, &dx, |x| loss(x, &w0, &b0), 1e-7);
    }

    #[test]
    fn softmax_ce_gradient_matches_finite_differences() {
        let classes = 4;
        let labels = vec![1usize, 3, 0];
        let mut logits = randn(labels.len() * classes, 30);
        let mut d = vec![0.0; logits.len()];
        softmax_cross_entropy(&logits, &labels, classes, &mut d);
        let labels2 = labels.clone();
        let analytic = d.clone();
        assert_grads(
            &mut logits,
            &analytic,
            |l| {
                let mut scratch = vec![0.0; l.len()];
                softmax_cross_entropy(l, &labels2, classes, &mut scratch)
            },
            1e-6,
        );
    }

    #[test]
    fn leaky_relu_gradient_matches_finite_differences() {
        let mut x = randn(16, 40);
        let analytic: Vec<f64> = x
            .iter()
            .map(|&v| if v > 0.0 { 1.0 } else { LEAKY_SLOPE })
            .collect();
        assert_grads(
            &mut x,
            &analytic,
            |x| {
                let mut y = x.to_vec();
                leaky_relu_forward(&mut y);
                y.iter().sum()
            },
            1e-6,
        );
    }
}
