//! Run manifests: every command that produces file outputs records what ran,
//! with which configuration and seeds, where the outputs went, and how long
//! it took. Re-running a manifest's command/config reproduces the outputs
//! byte-identically (the manifest itself carries the only wall-clock field).

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub artifact_version: String,
    pub outputs: Vec<String>,
    pub wall_ms: u128,
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seeds: Vec<u64>,
    outputs: Vec<String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config,
            seeds: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.seeds.push(seed);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            command: self.command,
            config: self.config,
            seeds: self.seeds,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs,
            wall_ms: self.started.elapsed().as_millis(),
        }
    }
}

/// Where a command's manifest belongs: the explicit out-dir when given,
/// otherwise next to the primary output file.
pub fn manifest_path(out_dir: Option<&Path>, primary_output: Option<&Path>) -> Option<PathBuf> {
    if let Some(dir) = out_dir {
        return Some(dir.join("manifest.json"));
    }
    primary_output.map(|p| {
        let mut name = p.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        p.with_file_name(name)
    })
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}
