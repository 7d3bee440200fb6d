//! Binary model checkpoints with an architecture fingerprint.
//!
//! Layout (little endian throughout):
//! `MYOFNET1` magic, u32 version, 32-byte SHA-256 of the layout description,
//! u64 parameter count, parameters as f32, u32 domain count, then per domain:
//! u32 id, u64 batches_seen, 6x64 f64 means, 6x64 f64 variances.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{BnStats, DomainStatsMap, Layout, Params, Real, BLOCKS, MAPS};

const MAGIC: &[u8; 8] = b"MYOFNET1";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io at {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint was written for a different architecture")]
    ArchMismatch,
    #[error("checkpoint is truncated or malformed: {0}")]
    Malformed(String),
}

/// A deserialized checkpoint: parameters plus per-domain statistics.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: Params<f32>,
    pub stats: DomainStatsMap,
}

fn arch_hash(layout: &Layout) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(layout.describe().as_bytes());
    hasher.finalize().into()
}

/// Writes parameters (converted to f32) and all domain statistics.
pub fn save_checkpoint<T: Real>(
    path: &Path,
    layout: &Layout,
    params: &Params<T>,
    stats: &DomainStatsMap,
) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&arch_hash(layout));
    buf.extend_from_slice(&(params.data.len() as u64).to_le_bytes());
    for v in &params.data {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    buf.extend_from_slice(&(stats.len() as u32).to_le_bytes());
    for (&id, s) in stats {
        buf.extend_from_slice(&id.to_le_bytes());
        buf.extend_from_slice(&s.batches_seen.to_le_bytes());
        for block in &s.mean {
            for v in block {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        for block in &s.var {
            for v in block {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let mut file = std::fs::File::create(path).map_err(io)?;
    file.write_all(&buf).map_err(io)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, layout: &Layout) -> Result<Checkpoint, CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(io)?
        .read_to_end(&mut bytes)
        .map_err(io)?;
    let mut at = 0usize;
    let mut take = |n: usize| -> Result<&[u8], CheckpointError> {
        if at + n > bytes.len() {
            return Err(CheckpointError::Malformed(format!(
                "needed {n} bytes at offset {at}, file has {}",
                bytes.len()
            )));
        }
        let s = &bytes[at..at + n];
        at += n;
        Ok(s)
    };
    if take(8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    if take(32)? != arch_hash(layout) {
        return Err(CheckpointError::ArchMismatch);
    }
    let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    if count != layout.total() {
        return Err(CheckpointError::ArchMismatch);
    }
    let mut params = Params::<f32>::zeros(layout);
    for i in 0..count {
        params.data[i] = f32::from_le_bytes(take(4)?.try_into().unwrap());
    }
    let domains = u32::from_le_bytes(take(4)?.try_into().unwrap());
    let mut stats = DomainStatsMap::new();
    for _ in 0..domains {
        let id = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let batches_seen = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let mut s = BnStats::new();
        s.batches_seen = batches_seen;
        for block in 0..BLOCKS {
            for c in 0..MAPS {
                s.mean[block][c] = f64::from_le_bytes(take(8)?.try_into().unwrap());
            }
        }
        for block in 0..BLOCKS {
            for c in 0..MAPS {
                s.var[block][c] = f64::from_le_bytes(take(8)?.try_into().unwrap());
            }
        }
        stats.insert(id, s);
    }
    if at != bytes.len() {
        return Err(CheckpointError::Malformed(format!(
            "{} trailing bytes",
            bytes.len() - at
        )));
    }
    Ok(Checkpoint { params, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trips() {
        let layout = Layout::new();
        let params: Params<f32> = Params::init(&layout, 5);
        let mut stats = DomainStatsMap::new();
        let mut s = BnStats::new();
        s.update(2, &vec![3.5; MAPS], &vec![0.25; MAPS], 0.1);
        s.commit();
        stats.insert(7, s);
        stats.insert(1, BnStats::new());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mnet");
        save_checkpoint(&path, &layout, &params, &stats).unwrap();
        let loaded = load_checkpoint(&path, &layout).unwrap();
        assert_eq!(loaded.params, params);
        assert_eq!(loaded.stats, stats);
        // Keys stay ordered.
        let keys: Vec<u32> = loaded.stats.keys().copied().collect();
        assert_eq!(keys, vec![1, 7]);
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let layout = Layout::new();
        let params: Params<f32> = Params::zeros(&layout);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mnet");
        save_checkpoint(&path, &layout, &params, &DomainStatsMap::new()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path, &layout),
            Err(CheckpointError::BadMagic)
        ));
        let good = {
            let mut b = bytes.clone();
            b[0] ^= 0xff;
            b
        };
        std::fs::write(&path, &good[..good.len() - 3]).unwrap();
        assert!(matches!(
            load_checkpoint(&path, &layout),
            Err(CheckpointError::Malformed(_))
        ));
    }
}
