use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

/// Written beside the outputs of every run. Contains no timestamps, so an
/// identical rerun reproduces it byte for byte.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub tool_version: String,
    /// Path of the device config, or `builtin`.
    pub config: String,
    pub device_hash: String,
    pub seed: u64,
    pub out_dir: String,
    pub parameters: serde_json::Value,
    pub outputs: Vec<OutputFile>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output files of one scenario and finally the manifest.
pub struct Writer {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Writer {
    pub fn new(dir: &Path, manifest: RunManifest) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Writer { dir: dir.to_path_buf(), manifest })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(OutputFile { file: name.to_string(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(self) -> Result<PathBuf> {
        let path = self.dir.join(format!("{}.manifest.json", self.manifest.scenario));
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
