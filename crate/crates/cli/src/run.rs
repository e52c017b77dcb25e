//! Output bookkeeping shared by every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use omnidensity::dataset::write_atomic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const RUN_MANIFEST: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Written next to the outputs of every run. Feeding it back to `run`
/// repeats the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(cfg)?))
}

/// Tracks the files a run reads and writes.
#[derive(Debug)]
pub struct Run {
    out_dir: Option<PathBuf>,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

impl Run {
    pub fn new(out_dir: Option<&Path>) -> Result<Self> {
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(Self {
            out_dir: out_dir.map(Path::to_path_buf),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Reads an input file and records its hash.
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.note_input(path, &bytes);
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String> {
        let bytes = self.read(path)?;
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn note_input(&mut self, path: &Path, bytes: &[u8]) {
        let path = path.display().to_string();
        if !self.inputs.iter().any(|f| f.path == path) {
            self.inputs.push(FileHash {
                path,
                sha256: sha256_hex(bytes),
            });
        }
    }

    /// Atomically writes `name` under the output directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let dir = self
            .out_dir
            .as_ref()
            .context("this command was run without an output directory")?;
        write_atomic(dir.join(name), bytes)?;
        self.outputs.push(FileHash {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn has_output_dir(&self) -> bool {
        self.out_dir.is_some()
    }

    /// Writes the run manifest; a no-op for runs without an output directory.
    pub fn finish(mut self, cfg: &RunConfig) -> Result<()> {
        if self.out_dir.is_none() {
            return Ok(());
        }
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(cfg)?,
            config: cfg.clone(),
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
        };
        self.write_json(RUN_MANIFEST, &manifest)
    }
}
