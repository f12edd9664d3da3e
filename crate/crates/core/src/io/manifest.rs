//! Run manifests: written when a run starts and rewritten when it ends.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Interface version of the file formats and command set.
pub const INTERFACE_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: Option<String>,
    pub base_seed: u64,
    pub tool_version: String,
    pub interface_version: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: Option<u64>,
    pub status: RunStatus,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: impl Into<String>, config_digest: Option<String>, base_seed: u64) -> Self {
        Self {
            command: command.into(),
            config_digest,
            base_seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            interface_version: INTERFACE_VERSION.to_string(),
            started_unix_ms: now_ms(),
            finished_unix_ms: None,
            status: RunStatus::Running,
            outputs: Vec::new(),
            warnings: Vec::new(),
            error: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self).map_err(std::io::Error::other)?;
        super::write_atomic(path, &json)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?).map_err(std::io::Error::other)?)
    }

    /// Stamps the end time and status, then rewrites the manifest.
    pub fn finish(&mut self, path: &Path, outcome: std::result::Result<(), String>) -> Result<()> {
        self.finished_unix_ms = Some(now_ms());
        match outcome {
            Ok(()) => self.status = RunStatus::Succeeded,
            Err(e) => {
                self.status = RunStatus::Failed;
                self.error = Some(e);
            }
        }
        self.write(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn begin_and_finish() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let mut m = RunManifest::new("experiment scaling", Some("00ff".into()), 7);
        m.write(&path).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap().status, RunStatus::Running);
        m.outputs.push("out.csv".into());
        m.warnings.push("1 record excluded".into());
        m.finish(&path, Ok(())).unwrap();
        let back = RunManifest::read(&path).unwrap();
        assert_eq!(back.status, RunStatus::Succeeded);
        assert!(back.finished_unix_ms.unwrap() >= back.started_unix_ms);
        assert_eq!(back, m);
    }

    #[test]
    fn failure_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let mut m = RunManifest::new("estimate", None, 0);
        m.finish(&path, Err("boom".into())).unwrap();
        let back = RunManifest::read(&path).unwrap();
        assert_eq!(back.status, RunStatus::Failed);
        assert_eq!(back.error.as_deref(), Some("boom"));
    }
}
