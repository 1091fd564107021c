//! Per-command manifest: inputs and outputs with content hashes, the full
//! config, and the seed, so any artifact directory can be regenerated.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRef {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: RunConfig,
    pub inputs: Vec<ArtifactRef>,
    pub outputs: Vec<ArtifactRef>,
    pub version: String,
    pub checkpoint_format: String,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            seed: config.seed,
            config_sha256: sha256_bytes(config.canonical_json()?.as_bytes()),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            checkpoint_format: format!(
                "{}/v{}",
                crate::model::CHECKPOINT_FORMAT,
                crate::model::CHECKPOINT_VERSION
            ),
        })
    }

    fn reference(dir: &Path, name: &str) -> Result<ArtifactRef> {
        Ok(ArtifactRef {
            path: name.to_string(),
            sha256: sha256_file(&dir.join(name))?,
        })
    }

    pub fn input(&mut self, dir: &Path, name: &str) -> Result<()> {
        self.inputs.push(Self::reference(dir, name)?);
        Ok(())
    }

    pub fn output(&mut self, dir: &Path, name: &str) -> Result<()> {
        self.outputs.push(Self::reference(dir, name)?);
        Ok(())
    }

    /// Writes `manifest-<command>.json` (spaces in the command become dashes).
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(format!("manifest-{}.json", self.command.replace(' ', "-")));
        let bytes = serde_json::to_vec_pretty(self)?;
        std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    }
}
