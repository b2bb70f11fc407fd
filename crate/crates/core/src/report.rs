//! Run reports: one JSON document per CLI invocation recording the config
//! hash, summaries of everything computed, wall-clock time, the exit
//! status, and a checksum for every emitted file.

use crate::error::Result;
use crate::io;
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Serialize)]
pub struct EmittedFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    /// Unix timestamp of the run start; the only non-deterministic field.
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub exit_status: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan_summary: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_summary: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_summary: Option<Value>,
    pub notes: Vec<String>,
    pub files: Vec<EmittedFile>,
    #[serde(skip)]
    started: Instant,
}

impl RunReport {
    pub fn new(command: &str, config_hash: &str) -> Self {
        RunReport {
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_clock_seconds: 0.0,
            exit_status: 0,
            plan_summary: None,
            trajectory_summary: None,
            certificate_summary: None,
            notes: Vec::new(),
            files: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Record an emitted file with its checksum. Call after writing.
    pub fn add_file(&mut self, path: &Path) -> Result<()> {
        self.files.push(EmittedFile {
            path: path.display().to_string(),
            sha256: io::sha256_file(path)?,
        });
        Ok(())
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    /// Finalize and write the report itself (its own checksum cannot be
    /// embedded, so the report is not in its own file list).
    pub fn finish(mut self, dir: &Path, exit_status: i32) -> Result<PathBuf> {
        self.exit_status = exit_status;
        self.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let path = dir.join("report.json");
        io::write_json(&path, &self)?;
        Ok(path)
    }
}
