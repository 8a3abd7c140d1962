use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let data = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        bytes: data.len() as u64,
        sha256: hex::encode(Sha256::digest(&data)),
    })
}

/// Everything needed to replay a run. Only the timestamps vary between
/// identical invocations.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command_line: Vec<String>,
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(config: Value, seed: Option<u64>, started_at: String) -> Self {
        Self {
            tool: "garec",
            version: env!("CARGO_PKG_VERSION"),
            command_line: std::env::args().collect(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at,
            finished_at: String::new(),
        }
    }

    pub fn inputs<'a>(mut self, paths: impl IntoIterator<Item = &'a Path>) -> Result<Self> {
        for p in paths {
            self.inputs.push(digest(p)?);
        }
        Ok(self)
    }

    pub fn write(mut self, outputs: &[PathBuf], to: &Path) -> Result<()> {
        for p in outputs {
            self.outputs.push(digest(p)?);
        }
        self.finished_at = now();
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(to, text + "\n").with_context(|| format!("writing {}", to.display()))
    }
}
