//! Output-directory conventions shared by every subcommand.
//!
//! Each run gets one directory holding the command's artifacts, an echo of
//! the resolved configuration, and a manifest listing every written file
//! with its SHA-256 — enough to audit that a rerun reproduced a run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const CONFIG_ECHO_NAME: &str = "config.toml";

pub struct RunDir {
    pub root: PathBuf,
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    command: &'a str,
    seed: u64,
    files: Vec<ManifestEntry>,
}

impl RunDir {
    /// Creates (or reuses) the output directory; without `--out` a
    /// timestamped directory under `runs/` is used.
    pub fn create(out: Option<PathBuf>, command: &str) -> Result<RunDir> {
        let root = out.unwrap_or_else(|| {
            let stamp = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            PathBuf::from("runs").join(format!("{command}-{stamp}"))
        });
        fs::create_dir_all(&root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(RunDir { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Echoes the resolved configuration so the run is self-describing.
    pub fn write_config(&self, cfg: &RunConfig) -> Result<()> {
        let text = toml::to_string_pretty(cfg).context("cannot serialize config echo")?;
        let path = self.path(CONFIG_ECHO_NAME);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    /// Writes pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_vec_pretty(value)
            .with_context(|| format!("cannot serialize {name}"))?;
        text.push(b'\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    /// Hashes everything in the directory into `manifest.json`; call last.
    pub fn write_manifest(&self, command: &str, seed: u64) -> Result<()> {
        let mut files = Vec::new();
        collect(&self.root, &self.root, &mut files)?;
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            files,
        };
        let mut text = serde_json::to_vec_pretty(&manifest).context("cannot serialize manifest")?;
        text.push(b'\n');
        let path = self.path(MANIFEST_NAME);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}

fn collect(root: &Path, dir: &Path, files: &mut Vec<ManifestEntry>) -> Result<()> {
    for entry in
        fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))?
    {
        let entry = entry.with_context(|| format!("cannot list {}", dir.display()))?;
        let path = entry.path();
        if path.is_dir() {
            collect(root, &path, files)?;
            continue;
        }
        let rel = path
            .strip_prefix(root)
            .expect("walk stays under the root")
            .to_string_lossy()
            .replace('\\', "/");
        if rel == MANIFEST_NAME {
            continue;
        }
        let data =
            fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let digest = Sha256::digest(&data);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        files.push(ManifestEntry {
            path: rel,
            bytes: data.len() as u64,
            sha256,
        });
    }
    Ok(())
}
