//! Provenance record written next to evaluation outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::ExperimentConfig;

pub const MANIFEST_VERSION: u32 = 1;

/// A file path with the SHA-256 of its contents at recording time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

impl HashedFile {
    pub fn record(role: impl Into<String>, path: &Path) -> Result<Self> {
        Ok(HashedFile {
            role: role.into(),
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }

    /// Fails when the file is missing or its contents changed.
    pub fn verify(&self) -> Result<()> {
        let actual = sha256_file(&self.path)?;
        if actual != self.sha256 {
            return Err(Error::input(format!(
                "{} ({}) no longer matches its recorded hash",
                self.path.display(),
                self.role
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub datasets: Vec<HashedFile>,
    /// Trained speaker and listener artifacts, in seed order.
    pub models: Vec<HashedFile>,
    pub outputs: Vec<HashedFile>,
    /// Milliseconds since the Unix epoch.
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

impl RunManifest {
    pub fn verify(&self) -> Result<()> {
        self.datasets
            .iter()
            .chain(&self.models)
            .chain(&self.outputs)
            .try_for_each(HashedFile::verify)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn now_unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn verify_detects_changes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data.csv");
        std::fs::write(&p, "x").unwrap();
        let manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: "test".into(),
            config: ExperimentConfig::default(),
            seeds: vec![0],
            datasets: vec![HashedFile::record("triples", &p).unwrap()],
            models: vec![],
            outputs: vec![],
            started_unix_ms: 0,
            finished_unix_ms: 1,
        };
        manifest.verify().unwrap();
        let back: RunManifest = serde_json::from_str(&manifest.to_json().unwrap()).unwrap();
        assert_eq!(back, manifest);
        std::fs::write(&p, "y").unwrap();
        assert!(manifest.verify().is_err());
        std::fs::remove_file(&p).unwrap();
        assert!(matches!(manifest.verify(), Err(Error::Io { .. })));
    }
}
