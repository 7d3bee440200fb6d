//! `myofeat` — reproducible driver for the EMG feature-analysis pipeline.
//!
//! Every invocation reads one TOML configuration, runs one stage, and leaves
//! a self-describing output directory: the artifacts, an echo of the resolved
//! configuration, and a checksum manifest.  Identical config + seed reruns
//! produce byte-identical artifacts.

mod commands;
mod config;
mod rundir;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;
use rundir::RunDir;

#[derive(Parser)]
#[command(
    name = "myofeat",
    version,
    about = "EMG feature analysis: handcrafted and learned descriptors, \
             adversarial training, topological feature maps"
)]
struct Cli {
    /// TOML run configuration; every section is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: runs/<command>-<unix-time>).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; falls back to MYOFEAT_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-participant gesture set.
    Synth,
    /// Band-pass raw recordings and cut analysis windows.
    Preprocess,
    /// Extract the handcrafted descriptor cloud from windows.
    Features,
    /// Train the gesture classifier.
    Train {
        /// Pooled training or the multi-domain adversarial loop.
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Extract per-feature-map activation descriptors from a trained model.
    LearnedFeatures,
    /// Build the topological map of a feature cloud.
    Mapper {
        /// a = handcrafted, b = learned, c = both stacked.
        #[arg(long, value_enum)]
        scenario: Scenario,
    },
    /// Explain one window with a guided class-activation map.
    Gradcam,
    /// Fit a linear read-out probe from trunk activations to a descriptor.
    Probe,
    /// Screen single features and groups with the pooled linear classifier.
    Lda,
    /// Compare two per-participant accuracy tables.
    Stats,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Standard,
    Adann,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scenario {
    A,
    B,
    C,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Preprocess => "preprocess",
            Command::Features => "features",
            Command::Train { .. } => "train",
            Command::LearnedFeatures => "learned-features",
            Command::Mapper { .. } => "mapper",
            Command::Gradcam => "gradcam",
            Command::Probe => "probe",
            Command::Lda => "lda",
            Command::Stats => "stats",
        }
    }

    /// The seed actually steering this command; deterministic stages
    /// record 0.
    fn effective_seed(&self, cfg: &RunConfig) -> u64 {
        match self {
            Command::Synth => cfg.synth.seed,
            Command::Train { .. } => cfg.train.seed,
            Command::Mapper { .. } => cfg.mapper.seed,
            Command::Probe => cfg.probe.seed,
            _ => 0,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            for cause in err.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    let name = cli.command.name();
    let seed = cli.command.effective_seed(&cfg);
    let dir = RunDir::create(cli.out, name)?;
    dir.write_config(&cfg)?;
    match &cli.command {
        Command::Synth => commands::synth(&cfg, &dir)?,
        Command::Preprocess => commands::preprocess(&cfg, &dir)?,
        Command::Features => commands::features(&cfg, &dir)?,
        Command::Train { mode } => commands::train(&cfg, &dir, *mode)?,
        Command::LearnedFeatures => commands::learned_features(&cfg, &dir)?,
        Command::Mapper { scenario } => commands::mapper(&cfg, &dir, *scenario)?,
        Command::Gradcam => commands::gradcam(&cfg, &dir)?,
        Command::Probe => commands::probe(&cfg, &dir)?,
        Command::Lda => commands::lda(&cfg, &dir)?,
        Command::Stats => commands::stats(&cfg, &dir)?,
    }
    dir.write_manifest(name, seed)?;
    log::info!("artifacts in {}", dir.root.display());
    Ok(())
}

/// Sizes the worker pool from `--threads`, then `MYOFEAT_THREADS`, then the
/// machine.
fn init_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("MYOFEAT_THREADS") {
            Ok(v) => Some(
                v.parse()
                    .with_context(|| format!("MYOFEAT_THREADS must be a thread count, got {v:?}"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        ensure!(n > 0, "the thread count must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("worker pool already started")?;
    }
    Ok(())
}
