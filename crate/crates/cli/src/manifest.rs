use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use trillt::Result;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

/// Written next to the data files as `<prefix>.manifest.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub command: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub threads: usize,
    pub wall_time_secs: f64,
    pub version: String,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects data files as they are written so the manifest can digest them.
#[derive(Debug)]
pub struct OutputSet {
    prefix: PathBuf,
    outputs: Vec<OutputDigest>,
}

impl OutputSet {
    pub fn new(prefix: &Path) -> Result<Self> {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        Ok(Self {
            prefix: prefix.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        let mut s = self.prefix.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    }

    pub fn write(&mut self, suffix: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(suffix);
        fs::write(&path, bytes)?;
        self.outputs.push(OutputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(suffix, &bytes)
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf> {
        let path = self.path(".manifest.json");
        manifest.outputs = self.outputs;
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(&path, bytes)?;
        Ok(path)
    }
}
