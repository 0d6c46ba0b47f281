//! In-memory artifact collection, written once at the end of a run together
//! with a manifest of SHA-256 hashes.

use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::Duration;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub artifacts: Vec<ArtifactEntry>,
    pub warnings: Vec<String>,
    /// Wall-clock time of the run; the only field that varies between identical runs.
    pub duration_s: f64,
}

#[derive(Debug, Default)]
pub struct ArtifactSet {
    files: Vec<(String, Vec<u8>)>,
    pub warnings: Vec<String>,
}

impl ArtifactSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_text(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(name, e))?;
        text.push('\n');
        self.add_text(name, text);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every artifact and then the manifest into `out_dir`.
    pub fn write(self, out_dir: &Path, command: &str, config: serde_json::Value, elapsed: Duration) -> CliResult<RunManifest> {
        std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        let mut entries = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            // plain file names only, so nothing lands outside out_dir
            if name.is_empty() || name.contains(['/', '\\']) || name == ".." || name == MANIFEST_NAME {
                return Err(CliError::io(name, "artifact names must be plain file names"));
            }
            let path = out_dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
            entries.push(ArtifactEntry { path: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        }
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            artifacts: entries,
            warnings: self.warnings,
            duration_s: elapsed.as_secs_f64(),
        };
        let path = out_dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::io(&path, e))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn rejects_paths() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = ArtifactSet::new();
        a.add_text("../escape.txt", "x".into());
        assert!(a.write(dir.path(), "t", serde_json::Value::Null, Duration::ZERO).is_err());
    }

    #[test]
    fn manifest_lists_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = ArtifactSet::new();
        a.add_text("a.txt", "abc".into());
        let m = a.write(dir.path(), "t", serde_json::Value::Null, Duration::ZERO).unwrap();
        assert_eq!(m.artifacts[0].sha256, sha256_hex(b"abc"));
        assert!(dir.path().join(MANIFEST_NAME).exists());
    }
}
