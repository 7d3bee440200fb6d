//! Manually implemented convolutional classifier.
//!
//! Architecture: six identical blocks of (conv 64 maps, 1x26 kernel ->
//! batch norm -> leaky rectifier -> dropout) over a 10x151 window, shrinking
//! the time axis 151 -> 126 -> 101 -> 76 -> 51 -> 26 -> 1, followed by two
//! affine heads on the 640-value flattened trunk output: an 11-way gesture
//! head and a 2-way domain-discrimination head.
//!
//! Batch norm keeps separate running statistics per domain (participant) and
//! shares the scale/shift parameters, so a trained trunk can be re-targeted
//! to an unseen domain by re-estimating statistics alone.

mod adam;
pub mod check;
mod checkpoint;
mod learned;
mod model;
mod ops;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use learned::{extract_learned, learned_label, LearnedError, LEARNED_ROWS};
pub use model::{windows_to_input, ConvNet, EvalTrace, TrainCache};
pub use ops::{
    affine_backward, affine_forward, bn_backward, bn_forward, bn_forward_fixed, batch_stats,
    col2im_add, conv_backward, conv_forward, dropout_forward, gemm, im2col, leaky_relu_backward,
    leaky_relu_forward, softmax, softmax_cross_entropy, ConvDims, Real, BN_EPS, LEAKY_SLOPE,
};

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dataio::{sub_rng, GESTURE_CLASSES, WINDOW_LEN};
use rand::Rng;

/// Feature maps per convolution block.
pub const MAPS: usize = 64;
/// Kernel width along the time axis.
pub const KERNEL: usize = 26;
/// Number of convolution blocks.
pub const BLOCKS: usize = 6;
/// Electrode rows; the kernel height is 1, so this axis passes through.
pub const ROWS: usize = 10;
/// Flattened trunk output: 64 maps x 10 rows x length 1.
pub const FLATTEN: usize = MAPS * ROWS;
/// Gesture-head classes.
pub const GESTURE_OUT: usize = GESTURE_CLASSES;
/// Domain-head classes (source vs target).
pub const DOMAIN_OUT: usize = 2;
/// Total trainable parameters.
pub const PARAM_COUNT: usize = 543_629;

/// Dropout probability used by the reference training recipe.
pub const DROPOUT_P: f64 = 0.35;

/// Offsets of every named parameter segment within the flat vector.
#[derive(Debug, Clone)]
pub struct Layout {
    pub blocks: [ConvDims; BLOCKS],
    conv_w: [Range<usize>; BLOCKS],
    conv_b: [Range<usize>; BLOCKS],
    gamma: [Range<usize>; BLOCKS],
    beta: [Range<usize>; BLOCKS],
    gesture_w: Range<usize>,
    gesture_b: Range<usize>,
    domain_w: Range<usize>,
    domain_b: Range<usize>,
    total: usize,
}

impl Default for Layout {
    fn default() -> Self {
        Self::new()
    }
}

impl Layout {
    pub fn new() -> Self {
        let mut blocks = [ConvDims {
            c_in: 1,
            c_out: MAPS,
            k: KERNEL,
            h: ROWS,
            l_in: WINDOW_LEN,
        }; BLOCKS];
        let mut l = WINDOW_LEN;
        for (i, b) in blocks.iter_mut().enumerate() {
            b.c_in = if i == 0 { 1 } else { MAPS };
            b.l_in = l;
            l = b.l_out();
        }
        debug_assert_eq!(l, 1);

        let mut cursor = 0usize;
        let mut take = |len: usize| {
            let r = cursor..cursor + len;
            cursor += len;
            r
        };
        let conv_w = std::array::from_fn(|i| take(blocks[i].c_out * blocks[i].patch_rows()));
        let conv_b = std::array::from_fn(|_| take(MAPS));
        let gamma = std::array::from_fn(|_| take(MAPS));
        let beta = std::array::from_fn(|_| take(MAPS));
        let gesture_w = take(GESTURE_OUT * FLATTEN);
        let gesture_b = take(GESTURE_OUT);
        let domain_w = take(DOMAIN_OUT * FLATTEN);
        let domain_b = take(DOMAIN_OUT);
        Layout {
            blocks,
            conv_w,
            conv_b,
            gamma,
            beta,
            gesture_w,
            gesture_b,
            domain_w,
            domain_b,
            total: cursor,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn conv_w(&self, block: usize) -> Range<usize> {
        self.conv_w[block].clone()
    }

    pub fn conv_b(&self, block: usize) -> Range<usize> {
        self.conv_b[block].clone()
    }

    pub fn gamma(&self, block: usize) -> Range<usize> {
        self.gamma[block].clone()
    }

    pub fn beta(&self, block: usize) -> Range<usize> {
        self.beta[block].clone()
    }

    pub fn gesture_w(&self) -> Range<usize> {
        self.gesture_w.clone()
    }

    pub fn gesture_b(&self) -> Range<usize> {
        self.gesture_b.clone()
    }

    pub fn domain_w(&self) -> Range<usize> {
        self.domain_w.clone()
    }

    pub fn domain_b(&self) -> Range<usize> {
        self.domain_b.clone()
    }

    /// Named segments in storage order, for reporting and sampled checks.
    pub fn segments(&self) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::new();
        for i in 0..BLOCKS {
            out.push((format!("block{}.conv_w", i + 1), self.conv_w(i)));
        }
        for i in 0..BLOCKS {
            out.push((format!("block{}.conv_b", i + 1), self.conv_b(i)));
        }
        for i in 0..BLOCKS {
            out.push((format!("block{}.gamma", i + 1), self.gamma(i)));
        }
        for i in 0..BLOCKS {
            out.push((format!("block{}.beta", i + 1), self.beta(i)));
        }
        out.push(("gesture_w".into(), self.gesture_w()));
        out.push(("gesture_b".into(), self.gesture_b()));
        out.push(("domain_w".into(), self.domain_w()));
        out.push(("domain_b".into(), self.domain_b()));
        out
    }

    /// Which loss drives each parameter: trunk parameters see the gesture
    /// loss and the reversed domain loss, head parameters only their own.
    pub fn segment_role(&self, name: &str) -> SegmentRole {
        if name.starts_with("gesture") {
            SegmentRole::GestureHead
        } else if name.starts_with("domain") {
            SegmentRole::DomainHead
        } else {
            SegmentRole::Trunk
        }
    }

    /// A compact canonical description, hashed into checkpoints so that
    /// weights are never loaded into a different architecture.
    pub fn describe(&self) -> String {
        let blocks: Vec<String> = self
            .blocks
            .iter()
            .map(|b| format!("{}x{}x{}@{}", b.c_in, b.c_out, b.k, b.l_in))
            .collect();
        format!(
            "blocks:{};heads:{}x{},{}x{};total:{}",
            blocks.join(","),
            FLATTEN,
            GESTURE_OUT,
            FLATTEN,
            DOMAIN_OUT,
            self.total
        )
    }
}

/// Loss attribution of a parameter segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentRole {
    Trunk,
    GestureHead,
    DomainHead,
}

/// Flat parameter vector; segment meaning comes from `Layout`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub data: Vec<T>,
}

impl<T: Real> Params<T> {
    pub fn zeros(layout: &Layout) -> Self {
        Params {
            data: vec![T::zero(); layout.total()],
        }
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` weight and bias init;
    /// batch-norm scales start at one, shifts at zero.
    pub fn init(layout: &Layout, seed: u64) -> Self {
        let mut rng = sub_rng(seed, &[0x1217]);
        let mut p = Self::zeros(layout);
        for i in 0..BLOCKS {
            let bound = 1.0 / (layout.blocks[i].patch_rows() as f64).sqrt();
            for idx in layout.conv_w(i).chain(layout.conv_b(i)) {
                p.data[idx] = T::from_f64(rng.gen_range(-bound..bound));
            }
            for idx in layout.gamma(i) {
                p.data[idx] = T::one();
            }
        }
        let bound = 1.0 / (FLATTEN as f64).sqrt();
        for idx in layout
            .gesture_w()
            .chain(layout.gesture_b())
            .chain(layout.domain_w())
            .chain(layout.domain_b())
        {
            p.data[idx] = T::from_f64(rng.gen_range(-bound..bound));
        }
        p
    }

    pub fn seg(&self, r: Range<usize>) -> &[T] {
        &self.data[r]
    }

    pub fn seg_mut(&mut self, r: Range<usize>) -> &mut [T] {
        &mut self.data[r]
    }

    pub fn to_f64(&self) -> Params<f64> {
        Params {
            data: self.data.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn to_f32(&self) -> Params<f32> {
        Params {
            data: self.data.iter().map(|v| v.as_f64() as f32).collect(),
        }
    }

    /// Squared Euclidean norm, evaluated in f64.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64() * v.as_f64()).sum()
    }
}

/// Running batch-norm statistics of one domain: per-block channel means and
/// variances plus how many batches contributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnStats {
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
    pub batches_seen: u64,
}

impl Default for BnStats {
    fn default() -> Self {
        Self::new()
    }
}

impl BnStats {
    pub fn new() -> Self {
        BnStats {
            mean: vec![vec![0.0; MAPS]; BLOCKS],
            var: vec![vec![1.0; MAPS]; BLOCKS],
            batches_seen: 0,
        }
    }

    /// Exponential update; the very first batch is copied directly so early
    /// estimates are not dragged toward the arbitrary 0/1 initialization.
    pub fn update(&mut self, block: usize, batch_mean: &[f64], batch_var: &[f64], momentum: f64) {
        let (m_slot, v_slot) = (&mut self.mean[block], &mut self.var[block]);
        if self.batches_seen == 0 {
            m_slot.copy_from_slice(batch_mean);
            v_slot.copy_from_slice(batch_var);
        } else {
            for (s, &b) in m_slot.iter_mut().zip(batch_mean) {
                *s = (1.0 - momentum) * *s + momentum * b;
            }
            for (s, &b) in v_slot.iter_mut().zip(batch_var) {
                *s = (1.0 - momentum) * *s + momentum * b;
            }
        }
    }

    /// Marks a full six-block update as committed.
    pub fn commit(&mut self) {
        self.batches_seen += 1;
    }
}

/// All domains' statistics, ordered for deterministic serialization.
pub type DomainStatsMap = BTreeMap<u32, BnStats>;
