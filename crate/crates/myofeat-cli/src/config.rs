//! The single TOML document driving every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use myofeat::dataio::{FilterSpec, SynthConfig};
use myofeat::features::FeatureConfig;
use myofeat::interpret::PROBE_RESTARTS;
use myofeat::mapper::MapperConfig;
use myofeat::training::TrainConfig;
use serde::{Deserialize, Serialize};

/// Full run configuration.  Every section falls back to its default, so an
/// empty file — or no `--config` at all — is a valid configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub mapper: MapperConfig,
    pub gradcam: GradcamConfig,
    pub probe: ProbeConfig,
    pub lda: LdaConfig,
}

/// Input locations; each subcommand requires only the entries it reads.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory of raw recording CSVs named `p{}_c{}_g{}.csv` (`preprocess`).
    pub recordings: Option<PathBuf>,
    /// Segmented window directory as written by `synth` or `preprocess`
    /// (`features`, `train`, `learned-features`, `gradcam`, `probe`, `lda`).
    pub windows: Option<PathBuf>,
    /// Trained model file (`learned-features`, `gradcam`, `probe`).
    pub checkpoint: Option<PathBuf>,
    /// Handcrafted feature cloud CSV (`mapper` scenarios a/c, `lda`).
    pub handcrafted: Option<PathBuf>,
    /// Learned feature cloud CSV (`mapper` scenarios b/c, `lda`).
    pub learned: Option<PathBuf>,
    /// Per-participant accuracy tables compared by `stats`; the report
    /// describes `candidate - baseline`.
    pub accuracy_baseline: Option<PathBuf>,
    pub accuracy_candidate: Option<PathBuf>,
}

/// Unwraps an input location with a message naming the missing key.
pub fn require_path<'a>(field: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    field
        .as_deref()
        .with_context(|| format!("this command needs `paths.{key}` in the config"))
}

/// Raw-recording conditioning ahead of segmentation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub filter: FilterSpec,
    /// Skip the band-pass entirely (segmentation only).
    pub apply_filter: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            filter: FilterSpec::default(),
            apply_filter: true,
        }
    }
}

/// Which window/class the saliency map explains.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcamConfig {
    /// Index into the window set, in on-disk order.
    pub window: usize,
    /// Class to explain; omitted means the window's own label.
    pub gesture: Option<u8>,
}

impl Default for GradcamConfig {
    fn default() -> Self {
        GradcamConfig {
            window: 0,
            gesture: None,
        }
    }
}

/// Linear read-out probe from one trunk block to one descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Trunk block whose activations are probed, 1-6.
    pub block: usize,
    /// Descriptor method name, e.g. "MAV" or "AR".
    pub method: String,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            block: 6,
            method: "MAV".to_string(),
            restarts: PROBE_RESTARTS,
            seed: 0,
        }
    }
}

/// Feature-screening options.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    /// Collapse each feature's channel vector to its first principal
    /// component (fitted on training cycles) before single-feature scoring;
    /// the usual choice for learned clouds.
    pub pc1_singles: bool,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))
    }

    /// Pins every stochastic section to one seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.train.seed = seed;
        self.mapper.seed = seed;
        self.probe.seed = seed;
    }
}
