//! The six-block network: forwards, exact backward, and activation traces.

use super::ops::*;
use super::{BnStats, Layout, Params, BLOCKS, DOMAIN_OUT, FLATTEN, GESTURE_OUT, MAPS, ROWS};
use crate::dataio::{sub_rng, Window};

/// Network bound to a fixed layout. All state (parameters, statistics) is
/// passed explicitly so the same instance serves training and evaluation.
#[derive(Debug, Clone, Default)]
pub struct ConvNet {
    pub layout: Layout,
}

/// Everything the backward pass needs from one training-mode forward.
pub struct TrainCache<T> {
    pub batch: usize,
    input: Vec<T>,
    blocks: Vec<BlockCache<T>>,
    pub gesture_logits: Vec<T>,
    pub domain_logits: Vec<T>,
}

struct BlockCache<T> {
    /// Normalized pre-affine activations.
    xhat: Vec<T>,
    /// Batch statistics used for normalization.
    mean: Vec<T>,
    var: Vec<T>,
    /// Inverted-dropout mask (0 or 1/(1-p)).
    mask: Vec<T>,
    /// Post-dropout output; the next block's input.
    output: Vec<T>,
}

impl<T> TrainCache<T> {
    /// Flattened trunk output (batch x 640), aliasing the last block.
    pub fn flatten(&self) -> &[T] {
        &self.blocks[BLOCKS - 1].output
    }

    /// Batch statistics of one block, for running-average updates.
    pub fn block_stats(&self, block: usize) -> (&[T], &[T]) {
        (&self.blocks[block].mean, &self.blocks[block].var)
    }
}

/// Activations recorded during a single-window evaluation forward.
pub struct EvalTrace<T> {
    /// Per block: convolution output (pre-normalization) and the rectified
    /// block output (64 x 10 x l_out each, flattened).
    pub conv_out: Vec<Vec<T>>,
    pub act: Vec<Vec<T>>,
    pub gesture_logits: Vec<T>,
    pub domain_logits: Vec<T>,
}

impl<T: Real> EvalTrace<T> {
    pub fn flatten(&self) -> &[T] {
        &self.act[BLOCKS - 1]
    }
}

impl ConvNet {
    pub fn new() -> Self {
        ConvNet {
            layout: Layout::new(),
        }
    }

    fn col_scratch<T: Real>(&self) -> Vec<T> {
        let max = self
            .layout
            .blocks
            .iter()
            .map(|d| d.patch_rows() * d.patch_cols())
            .max()
            .unwrap();
        vec![T::zero(); max]
    }

    /// Training-mode forward: batch-statistics normalization and inverted
    /// dropout. Masks derive only from `(dropout_seed, block, slot)`, so a
    /// forward is exactly repeatable for gradient validation.
    pub fn forward_train<T: Real>(
        &self,
        params: &Params<T>,
        input: Vec<T>,
        dropout_p: f64,
        dropout_seed: u64,
    ) -> TrainCache<T> {
        let first = &self.layout.blocks[0];
        let batch = input.len() / first.in_len();
        assert_eq!(input.len(), batch * first.in_len(), "input shape");
        let mut col = self.col_scratch::<T>();
        let mut blocks = Vec::with_capacity(BLOCKS);
        let mut x = input.clone();
        for (i, dims) in self.layout.blocks.iter().enumerate() {
            let out_len = dims.out_len();
            let spatial = dims.h * dims.l_out();
            let mut conv = vec![T::zero(); batch * out_len];
            conv_forward(
                dims,
                &x,
                params.seg(self.layout.conv_w(i)),
                params.seg(self.layout.conv_b(i)),
                &mut conv,
                &mut col,
            );
            let (mean, var) = batch_stats(&conv, MAPS, spatial);
            let mut xhat = vec![T::zero(); conv.len()];
            let mut y = vec![T::zero(); conv.len()];
            bn_forward(
                &conv,
                MAPS,
                spatial,
                &mean,
                &var,
                params.seg(self.layout.gamma(i)),
                params.seg(self.layout.beta(i)),
                &mut xhat,
                &mut y,
            );
            leaky_relu_forward(&mut y);
            let mut mask = vec![T::one(); y.len()];
            for b in 0..batch {
                let seg = b * out_len..(b + 1) * out_len;
                let mut rng = sub_rng(dropout_seed, &[i as u64, b as u64]);
                dropout_forward(&mut y[seg.clone()], &mut mask[seg], dropout_p, &mut rng);
            }
            blocks.push(BlockCache {
                xhat,
                mean,
                var,
                mask,
                output: y,
            });
            x = blocks[i].output.clone();
        }
        let flatten = &blocks[BLOCKS - 1].output;
        let mut gesture_logits = vec![T::zero(); batch * GESTURE_OUT];
        let mut domain_logits = vec![T::zero(); batch * DOMAIN_OUT];
        affine_forward(
            flatten,
            params.seg(self.layout.gesture_w()),
            params.seg(self.layout.gesture_b()),
            FLATTEN,
            GESTURE_OUT,
            &mut gesture_logits,
        );
        affine_forward(
            flatten,
            params.seg(self.layout.domain_w()),
            params.seg(self.layout.domain_b()),
            FLATTEN,
            DOMAIN_OUT,
            &mut domain_logits,
        );
        TrainCache {
            batch,
            input,
            blocks,
            gesture_logits,
            domain_logits,
        }
    }

    /// Exact gradients of the cached forward. The three logit gradients let
    /// callers weight the heads differently from the trunk: head parameters
    /// receive `d_gesture` / `d_domain_head`, while the trunk receives
    /// `d_gesture` plus `d_domain_trunk` (where a caller implements gradient
    /// reversal by negating the latter).
    pub fn backward<T: Real>(
        &self,
        params: &Params<T>,
        cache: &TrainCache<T>,
        d_gesture: &[T],
        d_domain_head: &[T],
        d_domain_trunk: &[T],
    ) -> Params<T> {
        let batch = cache.batch;
        assert_eq!(d_gesture.len(), batch * GESTURE_OUT);
        assert_eq!(d_domain_head.len(), batch * DOMAIN_OUT);
        assert_eq!(d_domain_trunk.len(), batch * DOMAIN_OUT);
        let mut grads = Params::zeros(&self.layout);
        let mut d_flat = vec![T::zero(); batch * FLATTEN];
        {
            let (gw, gb) = (self.layout.gesture_w(), self.layout.gesture_b());
            let mut d_gw = vec![T::zero(); gw.len()];
            let mut d_gb = vec![T::zero(); gb.len()];
            affine_backward(
                cache.flatten(),
                params.seg(gw.clone()),
                d_gesture,
                FLATTEN,
                GESTURE_OUT,
                &mut d_gw,
                &mut d_gb,
                Some(&mut d_flat),
            );
            grads.seg_mut(gw).copy_from_slice(&d_gw);
            grads.seg_mut(gb).copy_from_slice(&d_gb);
        }
        {
            let (dw, db) = (self.layout.domain_w(), self.layout.domain_b());
            let mut d_dw = vec![T::zero(); dw.len()];
            let mut d_db = vec![T::zero(); db.len()];
            affine_backward(
                cache.flatten(),
                params.seg(dw.clone()),
                d_domain_head,
                FLATTEN,
                DOMAIN_OUT,
                &mut d_dw,
                &mut d_db,
                None,
            );
            // The trunk sees its own (possibly reversed) domain signal.
            gemm(
                batch,
                FLATTEN,
                DOMAIN_OUT,
                T::one(),
                d_domain_trunk,
                false,
                params.seg(dw.clone()),
                false,
                T::one(),
                &mut d_flat,
            );
            grads.seg_mut(dw).copy_from_slice(&d_dw);
            grads.seg_mut(db).copy_from_slice(&d_db);
        }

        let mut col = self.col_scratch::<T>();
        let mut d_out = d_flat;
        for i in (0..BLOCKS).rev() {
            let dims = &self.layout.blocks[i];
            let spatial = dims.h * dims.l_out();
            let block = &cache.blocks[i];
            // Dropout backward.
            for (g, &m) in d_out.iter_mut().zip(&block.mask) {
                *g *= m;
            }
            // Rectifier backward; the pre-activation is gamma*xhat + beta.
            let gamma = params.seg(self.layout.gamma(i));
            let beta = params.seg(self.layout.beta(i));
            let stride = MAPS * spatial;
            let slope = T::from_f64(LEAKY_SLOPE);
            for b in 0..batch {
                for c in 0..MAPS {
                    let base = b * stride + c * spatial;
                    for idx in base..base + spatial {
                        let pre = gamma[c] * block.xhat[idx] + beta[c];
                        if pre <= T::zero() {
                            d_out[idx] *= slope;
                        }
                    }
                }
            }
            // Batch-norm backward.
            let mut d_conv = vec![T::zero(); d_out.len()];
            {
                let (gr, br) = (self.layout.gamma(i), self.layout.beta(i));
                let mut d_gamma = vec![T::zero(); MAPS];
                let mut d_beta = vec![T::zero(); MAPS];
                bn_backward(
                    &d_out,
                    &block.xhat,
                    MAPS,
                    spatial,
                    &block.var,
                    gamma,
                    &mut d_gamma,
                    &mut d_beta,
                    &mut d_conv,
                );
                grads.seg_mut(gr).copy_from_slice(&d_gamma);
                grads.seg_mut(br).copy_from_slice(&d_beta);
            }
            // Convolution backward.
            let input = if i == 0 {
                &cache.input
            } else {
                &cache.blocks[i - 1].output
            };
            let mut d_input = if i == 0 {
                None
            } else {
                Some(vec![T::zero(); input.len()])
            };
            {
                let (wr, br) = (self.layout.conv_w(i), self.layout.conv_b(i));
                let mut d_w = vec![T::zero(); wr.len()];
                let mut d_b = vec![T::zero(); br.len()];
                conv_backward(
                    dims,
                    input,
                    params.seg(wr.clone()),
                    &d_conv,
                    &mut d_w,
                    &mut d_b,
                    d_input.as_deref_mut(),
                    &mut col,
                );
                grads.seg_mut(wr).copy_from_slice(&d_w);
                grads.seg_mut(br).copy_from_slice(&d_b);
            }
            match d_input {
                Some(di) => d_out = di,
                None => break,
            }
        }
        grads
    }

    /// Folds the cached batch statistics into a domain's running statistics.
    pub fn accumulate_stats<T: Real>(
        &self,
        cache: &TrainCache<T>,
        stats: &mut BnStats,
        momentum: f64,
    ) {
        for i in 0..BLOCKS {
            let (mean, var) = cache.block_stats(i);
            let m: Vec<f64> = mean.iter().map(|v| v.as_f64()).collect();
            let v: Vec<f64> = var.iter().map(|v| v.as_f64()).collect();
            stats.update(i, &m, &v, momentum);
        }
        stats.commit();
    }

    /// Evaluation forward with a domain's running statistics; no dropout.
    /// Returns `(gesture_logits, domain_logits)`, each `batch x classes`.
    pub fn forward_eval<T: Real>(
        &self,
        params: &Params<T>,
        input: &[T],
        stats: &BnStats,
    ) -> (Vec<T>, Vec<T>) {
        let first = &self.layout.blocks[0];
        let batch = input.len() / first.in_len();
        let mut col = self.col_scratch::<T>();
        let mut x = input.to_vec();
        for (i, dims) in self.layout.blocks.iter().enumerate() {
            let spatial = dims.h * dims.l_out();
            let mut conv = vec![T::zero(); batch * dims.out_len()];
            conv_forward(
                dims,
                &x,
                params.seg(self.layout.conv_w(i)),
                params.seg(self.layout.conv_b(i)),
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
                params.seg(self.layout.gamma(i)),
                params.seg(self.layout.beta(i)),
            );
            leaky_relu_forward(&mut conv);
            x = conv;
        }
        let mut gesture_logits = vec![T::zero(); batch * GESTURE_OUT];
        let mut domain_logits = vec![T::zero(); batch * DOMAIN_OUT];
        affine_forward(
            &x,
            params.seg(self.layout.gesture_w()),
            params.seg(self.layout.gesture_b()),
            FLATTEN,
            GESTURE_OUT,
            &mut gesture_logits,
        );
        affine_forward(
            &x,
            params.seg(self.layout.domain_w()),
            params.seg(self.layout.domain_b()),
            FLATTEN,
            DOMAIN_OUT,
            &mut domain_logits,
        );
        (gesture_logits, domain_logits)
    }

    /// Gesture predictions (argmax) for a batch under the given statistics.
    pub fn predict<T: Real>(&self, params: &Params<T>, input: &[T], stats: &BnStats) -> Vec<usize> {
        let (gesture, _) = self.forward_eval(params, input, stats);
        gesture
            .chunks(GESTURE_OUT)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap()
            })
            .collect()
    }

    /// Single-window evaluation forward that records every intermediate
    /// activation, for attribution and probing.
    pub fn forward_trace<T: Real>(
        &self,
        params: &Params<T>,
        window: &[T],
        stats: &BnStats,
    ) -> EvalTrace<T> {
        let first = &self.layout.blocks[0];
        assert_eq!(window.len(), first.in_len(), "trace takes one window");
        let mut col = self.col_scratch::<T>();
        let mut conv_out = Vec::with_capacity(BLOCKS);
        let mut act = Vec::with_capacity(BLOCKS);
        let mut x = window.to_vec();
        for (i, dims) in self.layout.blocks.iter().enumerate() {
            let spatial = dims.h * dims.l_out();
            let mut conv = vec![T::zero(); dims.out_len()];
            conv_forward(
                dims,
                &x,
                params.seg(self.layout.conv_w(i)),
                params.seg(self.layout.conv_b(i)),
                &mut conv,
                &mut col,
            );
            conv_out.push(conv.clone());
            let mean: Vec<T> = stats.mean[i].iter().map(|&v| T::from_f64(v)).collect();
            let var: Vec<T> = stats.var[i].iter().map(|&v| T::from_f64(v)).collect();
            bn_forward_fixed(
                &mut conv,
                MAPS,
                spatial,
                &mean,
                &var,
                params.seg(self.layout.gamma(i)),
                params.seg(self.layout.beta(i)),
            );
            leaky_relu_forward(&mut conv);
            act.push(conv.clone());
            x = conv;
        }
        let mut gesture_logits = vec![T::zero(); GESTURE_OUT];
        let mut domain_logits = vec![T::zero(); DOMAIN_OUT];
        affine_forward(
            &x,
            params.seg(self.layout.gesture_w()),
            params.seg(self.layout.gesture_b()),
            FLATTEN,
            GESTURE_OUT,
            &mut gesture_logits,
        );
        affine_forward(
            &x,
            params.seg(self.layout.domain_w()),
            params.seg(self.layout.domain_b()),
            FLATTEN,
            DOMAIN_OUT,
            &mut domain_logits,
        );
        EvalTrace {
            conv_out,
            act,
            gesture_logits,
            domain_logits,
        }
    }
}

/// Converts windows into the flat `(batch, 1, 10, 151)` network input.
pub fn windows_to_input<T: Real>(windows: &[&Window]) -> Vec<T> {
    let mut out = Vec::with_capacity(windows.len() * ROWS * crate::dataio::WINDOW_LEN);
    for w in windows {
        out.extend(w.data.iter().map(|&v| T::from_f64(v)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convnet::PARAM_COUNT;

    fn tiny_batch(batch: usize, seed: u64) -> Vec<f32> {
        let mut rng = sub_rng(seed, &[0xbeef]);
        use rand::Rng;
        (0..batch * ROWS * crate::dataio::WINDOW_LEN)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect()
    }

    #[test]
    fn forward_shapes_and_determinism() {
        let net = ConvNet::new();
        let params: Params<f32> = Params::init(&net.layout, 0);
        assert_eq!(params.data.len(), PARAM_COUNT);
        let input = tiny_batch(3, 4);
        let a = net.forward_train(&params, input.clone(), 0.35, 11);
        let b = net.forward_train(&params, input, 0.35, 11);
        assert_eq!(a.gesture_logits, b.gesture_logits);
        assert_eq!(a.domain_logits, b.domain_logits);
        assert_eq!(a.gesture_logits.len(), 3 * GESTURE_OUT);
        assert_eq!(a.domain_logits.len(), 3 * DOMAIN_OUT);
        assert_eq!(a.flatten().len(), 3 * FLATTEN);
    }

    #[test]
    fn dropout_masks_vary_with_seed_but_not_batch_position() {
        let net = ConvNet::new();
        let params: Params<f32> = Params::init(&net.layout, 0);
        let input = tiny_batch(2, 4);
        let a = net.forward_train(&params, input.clone(), 0.35, 1);
        let b = net.forward_train(&params, input, 0.35, 2);
        assert_ne!(a.gesture_logits, b.gesture_logits);
    }

    #[test]
    fn eval_forward_is_dropout_free_and_stable() {
        let net = ConvNet::new();
        let params: Params<f32> = Params::init(&net.layout, 1);
        let input = tiny_batch(2, 5);
        let train = net.forward_train(&params, input.clone(), 0.0, 0);
        let mut stats = BnStats::new();
        net.accumulate_stats(&train, &mut stats, 0.1);
        let (g1, _) = net.forward_eval(&params, &input, &stats);
        let (g2, _) = net.forward_eval(&params, &input, &stats);
        assert_eq!(g1, g2);
        // With stats equal to this batch's stats, eval matches the
        // dropout-free train forward.
        for (a, b) in g1.iter().zip(&train.gesture_logits) {
            assert!((a - b).abs() < 2e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn trace_matches_eval_logits() {
        let net = ConvNet::new();
        let params: Params<f32> = Params::init(&net.layout, 2);
        let input = tiny_batch(1, 6);
        let train = net.forward_train(&params, input.clone(), 0.0, 0);
        let mut stats = BnStats::new();
        net.accumulate_stats(&train, &mut stats, 0.1);
        let (g, d) = net.forward_eval(&params, &input, &stats);
        let trace = net.forward_trace(&params, &input, &stats);
        for (a, b) in g.iter().zip(&trace.gesture_logits) {
            assert!((a - b).abs() < 1e-5);
        }
        for (a, b) in d.iter().zip(&trace.domain_logits) {
            assert!((a - b).abs() < 1e-5);
        }
        assert_eq!(trace.act[5].len(), FLATTEN);
        assert_eq!(trace.conv_out[0].len(), MAPS * ROWS * 126);
    }
}
