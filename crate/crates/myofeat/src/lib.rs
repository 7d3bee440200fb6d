//! Surface EMG feature-space analysis toolkit.
//!
//! The crate covers the full pipeline from raw multi-channel recordings to
//! statistical comparisons of feature families:
//!
//! ```text
//! recordings (CSV)                synthetic surrogate (synth)
//!        |                                   |
//!        +--------------- dataio ------------+
//!        |   band-pass filter -> 10 x 151 windows
//!        v
//!   features ---- 79 handcrafted descriptors per channel
//!        |
//!        |    convnet + training ---- adversarially trained ConvNet,
//!        |         |                  per-participant BatchNorm statistics
//!        |         +-- learned features (384 time-averaged activation rows)
//!        v         v
//!      mapper ---- PCA -> t-SNE lens -> overlapping cover -> Ward clusters
//!        |         -> topological network of the feature space
//!        v
//!    evaluate ---- LDA feature screening, Wilcoxon signed-rank, Cohen's d
//!        |
//!    interpret --- guided Grad-CAM relevance maps, linear regression probes
//! ```
//!
//! Every stage is deterministic given its seed; reruns with identical
//! configuration produce byte-identical artifacts.

pub mod convnet;
pub mod dataio;
pub mod evaluate;
pub mod features;
pub mod interpret;
pub mod mapper;
pub mod training;
