//! Per-run report files.
//!
//! A report is pretty-printed JSON with a fixed field order. Floats are
//! written in their shortest round-trip form, so reading a report back and
//! summarizing it gives the same bytes as summarizing the in-memory value.
//! Learned encodings are embedded as plain-text matrices (one row per line).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::Scheme;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// The loss became non-finite at `step`.
    Failed {
        step: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub step: usize,
    /// Mean training loss over the steps since the previous checkpoint.
    pub train_loss: Option<f64>,
    pub validation_accuracy: f64,
    /// `σ(λ)` at this checkpoint (`plsord` only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ordering_weights: Option<Vec<f64>>,
    /// Current learned encoding as a plain-text matrix (`learned` only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub learned_encoding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingOutcome {
    pub candidates: Vec<Vec<f64>>,
    pub final_weights: Vec<f64>,
    pub dominant_index: usize,
    pub dominant_ordering: Vec<f64>,
    /// Candidate equivalent to the generator's hidden ordering.
    pub true_index: Option<usize>,
    pub recovered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedOutcome {
    pub target_mass: f64,
    /// Final encoding as a plain-text matrix.
    pub encoding: String,
    /// `y_{i|t} − y_{t|i}`.
    pub asymmetry: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub scheme: Scheme,
    pub label: String,
    pub size: usize,
    pub seed: u64,
    pub config: Vec<(String, String)>,
    /// Angle of each class centre in the generated data.
    pub true_ordering: Vec<f64>,
    pub status: RunStatus,
    pub checkpoints: Vec<CheckpointRecord>,
    pub best_step: usize,
    pub best_validation_accuracy: f64,
    /// Accuracy of the best checkpoint against clean test labels.
    pub test_accuracy: f64,
    /// Rows are clean test labels, columns predictions.
    pub confusion: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ordering: Option<OrderingOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub learned: Option<LearnedOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_ms: Option<u64>,
}

impl RunReport {
    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// `<label>_n<size>_seed<seed>.json` with characters outside
    /// `[A-Za-z0-9._-]` replaced by `_`.
    pub fn file_name(&self) -> String {
        let slug: String = self
            .label
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        format!(
            "{}_n{}_seed{}.json",
            slug.trim_end_matches('_'),
            self.size,
            self.seed
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad run report: {e}")))
    }

    pub fn save_in(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(self.file_name());
        std::fs::write(&path, self.to_json()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Reads every `*.json` report in `dir`, sorted by file name.
pub fn load_reports(dir: &Path) -> Result<Vec<RunReport>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| RunReport::load(p)).collect()
}
