//! Run manifest: what each stage read and wrote, with content hashes.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seed: u64,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub seconds: f64,
    pub warnings: Vec<String>,
    /// Stage-specific statistics.
    pub details: serde_json::Value,
}

/// Checks on the labeled cloud, filled in by the annotate stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub points: usize,
    /// Points with no proxy point within the transfer distance.
    pub unlabeled_points: usize,
    pub unlabeled_fraction: f64,
    /// Sampled share of points whose proxy neighbourhood mixes classes.
    pub boundary_fraction: f64,
    /// Fine classes (ground aggregate excluded) with at least one point.
    pub classes_present: Vec<String>,
    pub fine_classes_present: usize,
    /// Buildings plus placed instance-capable objects.
    pub placed_instances: usize,
    pub instances_with_points: usize,
    pub instances_missing: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub stages: Vec<StageRecord>,
    pub warnings: Vec<String>,
    pub audit: Option<Audit>,
    /// Set when a stage failed; the stages before it are listed.
    pub failed_stage: Option<String>,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(config: RunConfig) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            stages: Vec::new(),
            warnings: Vec::new(),
            audit: None,
            failed_stage: None,
            error: None,
        }
    }

    /// Replaces the record of a re-run stage, keeping stage order.
    pub fn record(&mut self, rec: StageRecord) {
        match self.stages.iter_mut().find(|s| s.name == rec.name) {
            Some(s) => *s = rec,
            None => self.stages.push(rec),
        }
        self.warnings = self.stages.iter().flat_map(|s| s.warnings.iter().map(move |w| format!("{}: {w}", s.name))).collect();
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Every output of every stage, for comparing runs.
    pub fn output_hashes(&self) -> Vec<(String, String)> {
        self.stages.iter().flat_map(|s| s.outputs.iter().map(|f| (f.path.clone(), f.sha256.clone()))).collect()
    }
}

pub fn hash_file(path: &Path) -> std::io::Result<(String, u64)> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(h.finalize()), total))
}

pub fn file_record(root: &Path, path: &Path) -> std::io::Result<FileRecord> {
    let (sha256, bytes) = hash_file(path)?;
    let rel = path.strip_prefix(root).unwrap_or(path);
    let rel = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/");
    Ok(FileRecord { path: rel, sha256, bytes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("abc.txt");
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, b"abc").unwrap();
        let r = file_record(dir.path(), &p).unwrap();
        assert_eq!(r.path, "sub/abc.txt");
        assert_eq!(r.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(r.bytes, 3);
    }
}
