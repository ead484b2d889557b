use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA: &str = "mentangle/manifest/v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Headline {
    pub r: Option<f64>,
    pub k: Option<f64>,
    pub pe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacyFlag {
    pub grid: String,
    pub adequate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool: String,
    pub version: String,
    pub verb: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<String>,
    pub config: RunConfig,
    pub adequacy: Vec<AdequacyFlag>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputDigest>,
    pub headline: Headline,
    pub warnings: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok((digest.iter().map(|b| format!("{b:02x}")).collect(), bytes.len() as u64))
}

impl RunManifest {
    pub fn digest_outputs(dir: &Path, files: &[PathBuf]) -> Result<Vec<OutputDigest>> {
        files
            .iter()
            .map(|f| {
                let (sha256, bytes) = sha256_file(&dir.join(f))?;
                Ok(OutputDigest {
                    path: f.to_string_lossy().replace('\\', "/"),
                    sha256,
                    bytes,
                })
            })
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let m: RunManifest = serde_json::from_str(&text)?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::Format(format!("unknown manifest schema {}", m.schema)));
        }
        Ok(m)
    }

    /// Files whose current digest differs from the recorded one.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for out in &self.outputs {
            match sha256_file(&dir.join(&out.path)) {
                Ok((sha, _)) if sha == out.sha256 => {}
                _ => bad.push(out.path.clone()),
            }
        }
        Ok(bad)
    }
}
