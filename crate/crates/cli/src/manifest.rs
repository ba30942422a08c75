//! Run manifest written next to every output artifact: what ran, on which
//! inputs (by content hash), with which seed and tool version. Timestamps
//! live only here, keeping the artifacts themselves byte-reproducible.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use setembed::Result;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_secs: f64,
}

pub struct ManifestBuilder {
    command: String,
    args: BTreeMap<String, String>,
    inputs: BTreeMap<String, String>,
    seed: u64,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            args: BTreeMap::new(),
            inputs: BTreeMap::new(),
            seed,
            started: Instant::now(),
        }
    }

    pub fn arg(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.args.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let bytes = std::fs::read(path)?;
        self.inputs
            .insert(path.display().to_string(), hex_sha256(&bytes));
        Ok(self)
    }

    /// Writes `<artifact>.manifest.json` next to the artifact.
    pub fn write_for(&self, artifact: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.clone(),
            args: self.args.clone(),
            inputs: self.inputs.clone(),
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_secs: self.started.elapsed().as_secs_f64(),
        };
        let mut path = PathBuf::from(artifact);
        let mut name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".to_string());
        name.push_str(".manifest.json");
        path.set_file_name(name);
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| setembed::Error::InvalidData(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}
