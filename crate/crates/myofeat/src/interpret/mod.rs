//! Interpretation of the trained network: gradient-based attribution maps
//! and affine regression probes from block activations onto handcrafted
//! descriptors.

mod probe;
mod saliency;

pub use probe::{
    fit_probe, probe_inputs, train_regression_probe, ProbeFit, ProbeReport, PROBE_EPOCHS,
    PROBE_RESTARTS,
};
pub use saliency::{
    grad_cam, guided_backprop, guided_grad_cam, input_gradient, save_relevance_csv,
    save_relevance_json, RelevanceMap,
};

use thiserror::Error;

use crate::convnet::{BLOCKS, GESTURE_OUT};

#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("gesture {0} outside 0..={}", GESTURE_OUT - 1)]
    BadGesture(usize),
    #[error("block {0} outside 1..={BLOCKS}")]
    BadBlock(usize),
    #[error("no normalization statistics for participant {0}")]
    MissingStats(u32),
    #[error("split has no {0} windows")]
    EmptySplit(&'static str),
    #[error("writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}
