//! Index of everything a run or sweep wrote.
//!
//! Paths are relative to the output directory and use `/` separators.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use grokbench::grokdetect::Aggregate;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::fsio;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// What produced the grid: a preset name, `config` or `sweep:<axis>`.
    pub source: String,
    pub points: Vec<PointEntry>,
    #[serde(default)]
    pub report_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Override {
    pub axis: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub index: usize,
    pub label: String,
    pub overrides: Vec<Override>,
    /// Effective configuration after presets, files, flags and axis values.
    pub config: ExperimentConfig,
    pub config_file: String,
    pub summary_file: String,
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub run: usize,
    /// Training seed; initialization and batch order derive from it.
    pub seed: u64,
    pub train_data_seed: u64,
    pub test_data_seed: u64,
    pub curve_file: String,
    /// Absent when training failed.
    pub report_file: Option<String>,
    pub error: Option<String>,
}

/// Contents of a grid point's `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub label: String,
    pub runs: usize,
    pub completed: usize,
    pub failed: usize,
    /// Over completed runs; absent when none completed.
    pub aggregate: Option<Aggregate>,
}

impl Manifest {
    pub fn new(source: impl Into<String>) -> Self {
        let now = unix_now();
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now,
            finished_unix: now,
            source: source.into(),
            points: Vec::new(),
            report_files: Vec::new(),
        }
    }

    /// Every file the manifest refers to, in order of appearance.
    pub fn files(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for p in &self.points {
            out.push(p.config_file.as_str());
            out.push(p.summary_file.as_str());
            for r in &p.runs {
                out.push(r.curve_file.as_str());
                out.extend(r.report_file.as_deref());
            }
        }
        out.extend(self.report_files.iter().map(String::as_str));
        out
    }

    /// Fails when a file is referenced twice.
    pub fn check_unique(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for f in self.files() {
            if !seen.insert(f) {
                return Err(HarnessError::artifact(
                    FILE_NAME,
                    format!("`{f}` referenced more than once"),
                ));
            }
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(FILE_NAME);
        if !path.is_file() {
            return Err(HarnessError::artifact(path, "manifest not found"));
        }
        let text = fsio::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| HarnessError::artifact(path, format!("corrupt manifest: {e}")))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.check_unique()?;
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fsio::write_atomic(&dir.join(FILE_NAME), text.as_bytes())
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
