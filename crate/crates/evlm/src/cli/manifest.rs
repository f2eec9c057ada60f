//! Run manifests: resolved config, inputs, outputs, and checksums.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Written atomically at the end of every successful stage run. Holds the
/// resolved configuration and seed, so re-running the stage with this
/// manifest's values reproduces the artifacts bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, OutputRecord>,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.to_string(), path.display().to_string());
    }

    /// Hashes the written file and records it.
    pub fn record_output(&mut self, name: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        self.outputs.insert(
            name.to_string(),
            OutputRecord {
                path: path.display().to_string(),
                sha256: format!("{:x}", hasher.finalize()),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    /// Writes via a temp file and rename so a crash never leaves a partial
    /// manifest behind.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let tmp: PathBuf = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_roundtrip_with_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = dir.path().join("data.txt");
        std::fs::write(&artifact, b"hello").unwrap();

        let mut manifest = RunManifest::new("generate", Some(7), serde_json::json!({"players": 3}));
        manifest.record_input("config", Path::new("cfg.json"));
        manifest.record_output("events", &artifact).unwrap();

        let path = dir.path().join("manifest.json");
        manifest.write_atomic(&path).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(back.subcommand, "generate");
        assert_eq!(back.seed, Some(7));
        assert_eq!(
            back.outputs["events"].sha256,
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
        assert_eq!(back.outputs["events"].bytes, 5);
        assert!(!path.with_extension("json.tmp").exists());
    }
}
