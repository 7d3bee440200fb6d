//! Differentiable tensor primitives shared by the network and its tests.
//!
//! Everything is parameterized by explicit dimensions so the same code runs
//! the production architecture and the tiny shapes used for exhaustive
//! finite-difference checks. All matrices are row-major contiguous slices;
//! GEMMs dispatch to `matrixmultiply`.

use rand::Rng;

/// Scalar type of network computations: `f32` for training speed, `f64` for
/// finite-difference gradient validation.
pub trait Real:
    num_traits::Float
    + num_traits::NumAssignOps
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Copy
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `C = alpha * A * B + beta * C` with raw strides; see `matrixmultiply`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// `C(m x n) = alpha * op(A) * op(B) + beta * C` for row-major contiguous
/// slices; `m`, `n`, `k` describe the operands after optional transposition.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(
    m: usize,
    n: usize,
    k: usize,
    alpha: T,
    a: &[T],
    a_trans: bool,
    b: &[T],
    b_trans: bool,
    beta: T,
    c: &mut [T],
) {
    assert_eq!(a.len(), m * k, "A size");
    assert_eq!(b.len(), k * n, "B size");
    assert_eq!(c.len(), m * n, "C size");
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Spatial dimensions of one convolution: kernels have height 1 and width
/// `k`, so rows (`h`) pass through unchanged and `l_out = l_in - k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvDims {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub h: usize,
    pub l_in: usize,
}

impl ConvDims {
    pub fn l_out(&self) -> usize {
        self.l_in - self.k + 1
    }

    /// Input elements per window.
    pub fn in_len(&self) -> usize {
        self.c_in * self.h * self.l_in
    }

    /// Output elements per window.
    pub fn out_len(&self) -> usize {
        self.c_out * self.h * self.l_out()
    }

    /// Rows of the unfolded patch matrix.
    pub fn patch_rows(&self) -> usize {
        self.c_in * self.k
    }

    /// Columns of the unfolded patch matrix.
    pub fn patch_cols(&self) -> usize {
        self.h * self.l_out()
    }
}

/// Unfolds one window `(c_in, h, l_in)` into the patch matrix
/// `(c_in * k) x (h * l_out)` so convolution becomes a single GEMM.
pub fn im2col<T: Real>(dims: &ConvDims, input: &[T], col: &mut [T]) {
    let l_out = dims.l_out();
    assert_eq!(input.len(), dims.in_len());
    assert_eq!(col.len(), dims.patch_rows() * dims.patch_cols());
    let cols = dims.patch_cols();
    for c in 0..dims.c_in {
        for k in 0..dims.k {
            let row_base = (c * dims.k + k) * cols;
            for h in 0..dims.h {
                let src = (c * dims.h + h) * dims.l_in + k;
                let dst = row_base + h * l_out;
                col[dst..dst + l_out].copy_from_slice(&input[src..src + l_out]);
            }
        }
    }
}

/// Scatter-adds a patch-matrix gradient back onto the input layout.
pub fn col2im_add<T: Real>(dims: &ConvDims, col: &[T], input_grad: &mut [T]) {
    let l_out = dims.l_out();
    let cols = dims.patch_cols();
    assert_eq!(col.len(), dims.patch_rows() * cols);
    assert_eq!(input_grad.len(), dims.in_len());
    for c in 0..dims.c_in {
        for k in 0..dims.k {
            let row_base = (c * dims.k + k) * cols;
            for h in 0..dims.h {
                let dst = (c * dims.h + h) * dims.l_in + k;
                let src = row_base + h * l_out;
                for t in 0..l_out {
                    input_grad[dst + t] += col[src + t];
                }
            }
        }
    }
}

/// Convolution forward for a batch: `out[b] = W * col(in[b]) + bias`.
///
/// `input` is `(batch, c_in, h, l_in)`, `weights` `(c_out, c_in * k)`,
/// `output` `(batch, c_out, h, l_out)`; `col` is scratch for one window.
pub fn conv_forward<T: Real>(
    dims: &ConvDims,
    input: &[T],
    weights: &[T],
    bias: &[T],
    output: &mut [T],
    col: &mut [T],
) {
    let batch = input.len() / dims.in_len();
    assert_eq!(input.len(), batch * dims.in_len());
    assert_eq!(output.len(), batch * dims.out_len());
    assert_eq!(weights.len(), dims.c_out * dims.patch_rows());
    assert_eq!(bias.len(), dims.c_out);
    let cols = dims.patch_cols();
    let col = &mut col[..dims.patch_rows() * cols];
    for b in 0..batch {
        im2col(dims, &input[b * dims.in_len()..(b + 1) * dims.in_len()], col);
        let out = &mut output[b * dims.out_len()..(b + 1) * dims.out_len()];
        gemm(
            dims.c_out,
            cols,
            dims.patch_rows(),
            T::one(),
            weights,
            false,
            col,
            false,
            T::zero(),
            out,
        );
        for c in 0..dims.c_out {
            let base = c * cols;
            for v in &mut out[base..base + cols] {
                *v += bias[c];
            }
        }
    }
}

/// Convolution backward. Accumulates into `d_weights` / `d_bias` and, when
/// given, writes the input gradient (overwriting it).
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Real>(
    dims: &ConvDims,
    input: &[T],
    weights: &[T],
    d_output: &[T],
    d_weights: &mut [T],
    d_bias: &mut [T],
    mut d_input: Option<&mut [T]>,
    col: &mut [T],
) {
    let batch = input.len() / dims.in_len();
    assert_eq!(d_output.len(), batch * dims.out_len());
    let cols = dims.patch_cols();
    let col = &mut col[..dims.patch_rows() * cols];
    if let Some(di) = d_input.as_deref_mut() {
        assert_eq!(di.len(), input.len());
        for v in di.iter_mut() {
            *v = T::zero();
        }
    }
    for b in 0..batch {
        let dout = &d_output[b * dims.out_len()..(b + 1) * dims.out_len()];
        im2col(dims, &input[b * dims.in_len()..(b + 1) * dims.in_len()], col);
        // dW += dOut * col^T
        gemm(
            dims.c_out,
            dims.patch_rows(),
            cols,
            T::one(),
            dout,
            false,
            col,
            true,
            T::one(),
            d_weights,
        );
        for c in 0..dims.c_out {
            let base = c * cols;
            d_bias[c] += dout[base..base + cols].iter().copied().sum::<T>();
        }
        if let Some(di) = d_input.as_deref_mut() {
            // dCol = W^T * dOut, then fold back onto the input layout.
            gemm(
                dims.patch_rows(),
                cols,
                dims.c_out,
                T::one(),
                weights,
                true,
                dout,
                false,
                T::zero(),
                col,
            );
            col2im_add(dims, col, &mut di[b * dims.in_len()..(b + 1) * dims.in_len()]);
        }
    }
}

/// Numerical floor added to variances before taking square roots.
pub const BN_EPS: f64 = 1e-5;

/// Per-channel batch statistics of a `(batch, channels, spatial)` tensor.
pub fn batch_stats<T: Real>(x: &[T], channels: usize, spatial: usize) -> (Vec<T>, Vec<T>) {
    let stride = channels * spatial;
    let batch = x.len() / stride;
    let m = T::from_f64((batch * spatial) as f64);
    let mut mean = vec![T::zero(); channels];
    let mut var = vec![T::zero(); channels];
    for b in 0..batch {
        for c in 0..channels {
            let base = b * stride + c * spatial;
            mean[c] += x[base..base + spatial].iter().copied().sum::<T>();
        }
    }
    for v in &mut mean {
        *v /= m;
    }
    for b in 0..batch {
        for c in 0..channels {
            let base = b * stride + c * spatial;
            var[c] += x[base..base + spatial]
                .iter()
                .map(|&v| (v - mean[c]) * (v - mean[c]))
                .sum::<T>();
        }
    }
    for v in &mut var {
        *v /= m;
    }
    (mean, var)
}

/// Batch-norm forward: `y = gamma * (x - mean) / sqrt(var + eps) + beta`.
/// Writes the normalized values into `xhat` and the result into `y`
/// (in-place over `x` is allowed by passing the same slice? no — separate).
#[allow(clippy::too_many_arguments)]
pub fn bn_forward<T: Real>(
    x: &[T],
    channels: usize,
    spatial: usize,
    mean: &[T],
    var: &[T],
    gamma: &[T],
    beta: &[T],
    xhat: &mut [T],
    y: &mut [T],
) {
    let stride = channels * spatial;
    let batch = x.len() / stride;
    let eps = T::from_f64(BN_EPS);
    for b in 0..batch {
        for c in 0..channels {
            let base = b * stride + c * spatial;
            let inv = (var[c] + eps).sqrt().recip();
            for i in base..base + spatial {
                let h = (x[i] - mean[c]) * inv;
                xhat[i] = h;
                y[i] = gamma[c] * h + beta[c];
            }
        }
    }
}

/// Batch-norm backward through batch statistics (exact population form):
/// `dx = gamma / (m * sqrt(var+eps)) * (m*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))`
/// where `dxhat = dy` pre-multiplied by nothing (gamma applied here).
#[allow(clippy::too_many_arguments)]
pub fn bn_backward<T: Real>(
    dy: &[T],
    xhat: &[T],
    channels: usize,
    spatial: usize,
    var: &[T],
    gamma: &[T],
    d_gamma: &mut [T],
    d_beta: &mut [T],
    dx: &mut [T],
) {
    let stride = channels * spatial;
    let batch = dy.len() / stride;
    let m = T::from_f64((batch * spatial) as f64);
    let eps = T::from_f64(BN_EPS);
    for c in 0..channels {
        let mut sum_dy = T::zero();
        let mut sum_dy_xhat = T::zero();
        for b in 0..batch {
            let base = b * stride + c * spatial;
            for i in base..base + spatial {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xhat[i];
            }
        }
        d_gamma[c] += sum_dy_xhat;
        d_beta[c] += sum_dy;
        let scale = gamma[c] / (m * (var[c] + eps).sqrt());
        for b in 0..batch {
            let base = b * stride + c * spatial;
            for i in base..base + spatial {
                dx[i] = scale * (m * dy[i] - sum_dy - xhat[i] * sum_dy_xhat);
            }
        }
    }
}

/// Batch-norm forward with fixed (running) statistics; no cache needed.
pub fn bn_forward_fixed<T: Real>(
    x: &mut [T],
    channels: usize,
    spatial: usize,
    mean: &[T],
    var: &[T],
    gamma: &[T],
    beta: &[T],
) {
    let stride = channels * spatial;
    let batch = x.len() / stride;
    let eps = T::from_f64(BN_EPS);
    for b in 0..batch {
        for c in 0..channels {
            let base = b * stride + c * spatial;
            let inv = (var[c] + eps).sqrt().recip();
            for v in &mut x[base..base + spatial] {
                *v = gamma[c] * (*v - mean[c]) * inv + beta[c];
            }
        }
    }
}

/// Negative-side slope of the rectifier.
pub const LEAKY_SLOPE: f64 = 0.1;

pub fn leaky_relu_forward<T: Real>(x: &mut [T]) {
    let slope = T::from_f64(LEAKY_SLOPE);
    for v in x {
        if *v < T::zero() {
            *v *= slope;
        }
    }
}

/// Backward using the pre-activation sign; exact zeros take the leaky branch.
pub fn leaky_relu_backward<T: Real>(pre: &[T], dy: &mut [T]) {
    let slope = T::from_f64(LEAKY_SLOPE);
    for (v, &p) in dy.iter_mut().zip(pre) {
        if p <= T::zero() {
            *v *= slope;
        }
    }
}

/// Fills `mask` with an inverted-dropout mask (`0` or `1/(1-p)`) and applies
/// it to `x`. `p == 0` leaves `x` untouched and the mask all-ones without
/// consuming randomness.
pub fn dropout_forward<T: Real, R: Rng>(x: &mut [T], mask: &mut [T], p: f64, rng: &mut R) {
    if p == 0.0 {
        for m in mask.iter_mut() {
            *m = T::one();
        }
        return;
    }
    let keep = 1.0 - p;
    let scale = T::from_f64(1.0 / keep);
    for (v, m) in x.iter_mut().zip(mask.iter_mut()) {
        if rng.gen::<f64>() < keep {
            *m = scale;
            *v *= scale;
        } else {
            *m = T::zero();
            *v = T::zero();
        }
    }
}

/// Fully connected forward: `logits(batch x out) = x(batch x in) * W^T + b`.
pub fn affine_forward<T: Real>(
    x: &[T],
    weights: &[T],
    bias: &[T],
    in_dim: usize,
    out_dim: usize,
    logits: &mut [T],
) {
    let batch = x.len() / in_dim;
    assert_eq!(weights.len(), out_dim * in_dim);
    assert_eq!(logits.len(), batch * out_dim);
    gemm(
        batch,
        out_dim,
        in_dim,
        T::one(),
        x,
        false,
        weights,
        true,
        T::zero(),
        logits,
    );
    for b in 0..batch {
        for o in 0..out_dim {
            logits[b * out_dim + o] += bias[o];
        }
    }
}

/// Fully connected backward; accumulates parameter gradients and adds the
/// input gradient into `dx` (callers zero or pre-seed it).
#[allow(clippy::too_many_arguments)]
pub fn affine_backward<T: Real>(
    x: &[T],
    weights: &[T],
    d_logits: &[T],
    in_dim: usize,
    out_dim: usize,
    d_weights: &mut [T],
    d_bias: &mut [T],
    dx: Option<&mut [T]>,
) {
    let batch = x.len() / in_dim;
    assert_eq!(d_logits.len(), batch * out_dim);
    // dW += dL^T * x
    gemm(
        out_dim,
        in_dim,
        batch,
        T::one(),
        d_logits,
        true,
        x,
        false,
        T::one(),
        d_weights,
    );
    for b in 0..batch {
        for o in 0..out_dim {
            d_bias[o] += d_logits[b * out_dim + o];
        }
    }
    if let Some(dx) = dx {
        // dx += dL * W
        gemm(
            batch,
            in_dim,
            out_dim,
            T::one(),
            d_logits,
            false,
            weights,
            false,
            T::one(),
            dx,
        );
    }
}

/// Mean softmax cross-entropy over a batch of logits. Returns the loss and
/// writes `(softmax - onehot) / batch` into `d_logits`.
pub fn softmax_cross_entropy<T: Real>(
    logits: &[T],
    labels: &[usize],
    classes: usize,
    d_logits: &mut [T],
) -> T {
    let batch = labels.len();
    assert_eq!(logits.len(), batch * classes);
    assert_eq!(d_logits.len(), logits.len());
    let inv_batch = T::from_f64(1.0 / batch as f64);
    let mut loss = T::zero();
    for b in 0..batch {
        let row = &logits[b * classes..(b + 1) * classes];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut denom = T::zero();
        for &v in row {
            denom += (v - max).exp();
        }
        let log_denom = denom.ln() + max;
        loss += (log_denom - row[labels[b]]) * inv_batch;
        for c in 0..classes {
            let p = (row[c] - log_denom).exp();
            let target = if c == labels[b] { T::one() } else { T::zero() };
            d_logits[b * classes + c] = (p - target) * inv_batch;
        }
    }
    loss
}

/// Softmax probabilities of one logit row.
pub fn softmax<T: Real>(row: &[T]) -> Vec<T> {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
    let denom: T = exps.iter().copied().sum();
    exps.into_iter().map(|v| v / denom).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gemm_matches_naive_product() {
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [7.0f64, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3x2
        let mut c = [0.0f64; 4];
        gemm(2, 2, 3, 1.0, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [58.0, 64.0, 139.0, 154.0]);
        // A^T path: same product expressed from the transposed storage.
        let at = [1.0f64, 4.0, 2.0, 5.0, 3.0, 6.0]; // 3x2 storing A^T
        let mut c2 = [0.0f64; 4];
        gemm(2, 2, 3, 1.0, &at, true, &b, false, 0.0, &mut c2);
        assert_eq!(c, c2);
    }

    #[test]
    fn im2col_round_trips_through_col2im() {
        let dims = ConvDims {
            c_in: 2,
            c_out: 3,
            k: 3,
            h: 2,
            l_in: 5,
        };
        let input: Vec<f64> = (0..dims.in_len()).map(|i| i as f64).collect();
        let mut col = vec![0.0; dims.patch_rows() * dims.patch_cols()];
        im2col(&dims, &input, &mut col);
        // Each input sample appears once per kernel tap that covers it.
        let mut counts = vec![0.0; dims.in_len()];
        let ones = vec![1.0; col.len()];
        col2im_add(&dims, &ones, &mut counts);
        for (i, &cnt) in counts.iter().enumerate() {
            let t = i % dims.l_in;
            let expect = (0..dims.k)
                .filter(|&k| t >= k && t - k + dims.k <= dims.l_in)
                .count() as f64;
            assert_eq!(cnt, expect, "sample {i}");
        }
    }

    #[test]
    fn conv_forward_matches_direct_convolution() {
        let dims = ConvDims {
            c_in: 2,
            c_out: 3,
            k: 3,
            h: 2,
            l_in: 6,
        };
        let batch = 2;
        let input: Vec<f64> = (0..batch * dims.in_len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let weights: Vec<f64> = (0..dims.c_out * dims.patch_rows())
            .map(|i| (i as f64 * 0.11).cos())
            .collect();
        let bias = vec![0.5, -0.25, 0.125];
        let mut out = vec![0.0; batch * dims.out_len()];
        let mut col = vec![0.0; dims.patch_rows() * dims.patch_cols()];
        conv_forward(&dims, &input, &weights, &bias, &mut out, &mut col);
        let l_out = dims.l_out();
        for b in 0..batch {
            for co in 0..dims.c_out {
                for h in 0..dims.h {
                    for t in 0..l_out {
                        let mut acc = bias[co];
                        for ci in 0..dims.c_in {
                            for k in 0..dims.k {
                                let x = input
                                    [b * dims.in_len() + (ci * dims.h + h) * dims.l_in + t + k];
                                let w = weights[co * dims.patch_rows() + ci * dims.k + k];
                                acc += x * w;
                            }
                        }
                        let got =
                            out[b * dims.out_len() + (co * dims.h + h) * l_out + t];
                        assert_relative_eq!(got, acc, max_relative = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn softmax_cross_entropy_gradient_sums_to_zero() {
        let logits = [0.2f64, -1.0, 0.5, 2.0, 0.0, -0.5];
        let labels = [2usize, 0];
        let mut d = [0.0f64; 6];
        let loss = softmax_cross_entropy(&logits, &labels, 3, &mut d);
        assert!(loss > 0.0);
        for b in 0..2 {
            let s: f64 = d[b * 3..(b + 1) * 3].iter().sum();
            assert_relative_eq!(s, 0.0, epsilon = 1e-12);
        }
    }
}
