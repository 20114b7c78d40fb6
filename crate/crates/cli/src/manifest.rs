use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Written next to every output file. Replaying `args` reproduces the outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    /// The configuration the command resolved and ran with.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_ms: f64,
    pub queries: Option<u64>,
    pub outputs: Vec<PathBuf>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    sibling(out, "manifest.json")
}

/// `results.csv` → `results.csv.<suffix>`
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m = serde_json::from_str(&text).map_err(capi::Error::from)?;
        Ok(m)
    }
}
