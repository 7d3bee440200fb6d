//! Feature screening and comparison statistics.
//!
//! A shared-covariance linear classifier ([`lda_fit`]/[`LdaModel`]) scores
//! how much gesture information single descriptors and descriptor groups
//! carry, following the cross-subject protocol: fit on every participant's
//! training cycles, test on every participant's held-out cycles.  Paired
//! accuracy comparisons are then judged with the Wilcoxon signed-rank test
//! and Cohen's d.

mod lda;
mod screening;
mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use lda::{lda_fit, ConfusionMatrix, LdaModel, LDA_RIDGE};
pub use screening::{
    eval_feature_group, eval_single_feature, eval_single_feature_pc1, save_screening_csv,
    screen_features, FeatureEval, GroupSummary, ScreeningReport,
};
pub use stats::{
    cohens_d, effect_label, wilcoxon_signed_rank, wilcoxon_signed_rank_with_limit,
    WILCOXON_EXACT_CAP, WILCOXON_EXACT_LIMIT,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 classes, got {got}")]
    TooFewClasses { got: usize },
    #[error("class {class} has {got} sample(s); need at least 2")]
    TooFewSamples { class: usize, got: usize },
    #[error("input has dimension {got}, model expects {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("covariance is singular even after regularization")]
    SingularCovariance,
    #[error("feature subset is empty")]
    EmptySubset,
    #[error("split {0} contains no windows")]
    EmptySplit(&'static str),
    #[error("no signal: all paired differences are zero")]
    NoSignal,
    #[error("need at least 5 nonzero differences, got {got}")]
    TooFewPairs { got: usize },
    #[error("each sample needs at least 2 values, got {got}")]
    TooSmallSample { got: usize },
    #[error("zero pooled standard deviation")]
    ZeroVariance,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
