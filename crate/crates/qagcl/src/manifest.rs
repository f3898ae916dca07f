//! Run manifests: what ran, with which inputs, producing which outputs.
//!
//! Every CLI command writes one of these next to its artifacts. In
//! deterministic mode the timestamps are omitted so re-runs are
//! byte-identical; everything else is already a pure function of config
//! and seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::config::hex_prefix;
use crate::error::{Error, Result};

/// Truncated SHA-256 used for all content fingerprints (16 hex chars).
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex_prefix(&Sha256::digest(bytes), 16)
}

pub fn file_hash(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    /// Canonical `key=value` lines of the resolved config.
    pub resolved_config: String,
    pub input_hashes: Vec<(String, String)>,
    pub output_paths: Vec<String>,
    pub started_unix: Option<u64>,
    pub finished_unix: Option<u64>,
}

impl RunManifest {
    /// Starts a manifest; timestamps are only recorded outside
    /// deterministic mode.
    pub fn start(command: &str, deterministic: bool) -> Self {
        RunManifest {
            command: command.to_string(),
            config_path: None,
            resolved_config: String::new(),
            input_hashes: Vec::new(),
            output_paths: Vec::new(),
            started_unix: if deterministic { None } else { Some(now_unix()) },
            finished_unix: None,
        }
    }

    pub fn input(&mut self, name: &str, hash: String) {
        self.input_hashes.push((name.to_string(), hash));
    }

    pub fn output(&mut self, path: &Path) {
        self.output_paths.push(path.display().to_string());
    }

    pub fn render(&self) -> String {
        let stamp = |t: Option<u64>| match t {
            Some(v) => v.to_string(),
            None => "-".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!("command\t{}\n", self.command));
        out.push_str(&format!(
            "config_path\t{}\n",
            self.config_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".into())
        ));
        out.push_str(&format!("started\t{}\n", stamp(self.started_unix)));
        out.push_str(&format!("finished\t{}\n", stamp(self.finished_unix)));
        for (name, hash) in &self.input_hashes {
            out.push_str(&format!("input\t{name}\t{hash}\n"));
        }
        for path in &self.output_paths {
            out.push_str(&format!("output\t{path}\n"));
        }
        for line in self.resolved_config.lines() {
            out.push_str(&format!("config\t{line}\n"));
        }
        out
    }

    /// Stamps the end time (outside deterministic mode) and writes
    /// atomically via a temporary file and rename.
    pub fn finish(mut self, path: &Path) -> Result<()> {
        if self.started_unix.is_some() {
            self.finished_unix = Some(now_unix());
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.render()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
