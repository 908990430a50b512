//! Sweep summaries.
//!
//! For each series and seed, test accuracy is replaced by its running
//! maximum over training-set sizes (the best accuracy reached at this size or
//! any smaller one). The table then reports the mean and standard deviation
//! of that value across seeds, alongside the plain per-size mean.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::Scheme;
use crate::harness::report::RunReport;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub scheme: Scheme,
    pub size: usize,
    /// Seeds with a completed run contributing to this row.
    pub seeds: usize,
    pub mean_running_max: f64,
    pub std_running_max: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

#[derive(Serialize)]
struct PlotSeries<'a> {
    label: &'a str,
    scheme: Scheme,
    sizes: Vec<usize>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

#[derive(Serialize)]
struct PlotData<'a> {
    rule: &'static str,
    series: Vec<PlotSeries<'a>>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregates a full `(series, size, seed)` grid.
pub fn sweep_summary(reports: &[RunReport]) -> Result<SummaryTable> {
    if reports.is_empty() {
        return Err(Error::Aggregation("no run reports to summarize".into()));
    }
    let series: BTreeSet<(Scheme, &str)> = reports
        .iter()
        .map(|r| (r.scheme, r.label.as_str()))
        .collect();
    let sizes: BTreeSet<usize> = reports.iter().map(|r| r.size).collect();
    let seeds: BTreeSet<u64> = reports.iter().map(|r| r.seed).collect();

    let mut cells: BTreeMap<(&str, usize, u64), &RunReport> = BTreeMap::new();
    for r in reports {
        if cells
            .insert((r.label.as_str(), r.size, r.seed), r)
            .is_some()
        {
            return Err(Error::Aggregation(format!(
                "duplicate report for {} size {} seed {}",
                r.label, r.size, r.seed
            )));
        }
    }
    let mut missing = Vec::new();
    for &(_, label) in &series {
        for &size in &sizes {
            for &seed in &seeds {
                if !cells.contains_key(&(label, size, seed)) {
                    missing.push(format!("{label} size {size} seed {seed}"));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Aggregation(format!(
            "ragged grid, missing cells: {}",
            missing.join("; ")
        )));
    }

    let mut rows = Vec::new();
    for &(scheme, label) in &series {
        let mut running: BTreeMap<u64, Option<f64>> = seeds.iter().map(|&s| (s, None)).collect();
        for &size in &sizes {
            let mut best_values = Vec::new();
            let mut raw_values = Vec::new();
            for &seed in &seeds {
                let r = cells[&(label, size, seed)];
                let best = running.get_mut(&seed).expect("seed present");
                if r.is_completed() {
                    raw_values.push(r.test_accuracy);
                    *best = Some(best.map_or(r.test_accuracy, |b: f64| b.max(r.test_accuracy)));
                }
                if let Some(b) = *best {
                    best_values.push(b);
                }
            }
            let (mean_running_max, std_running_max) = mean_std(&best_values);
            let (mean_accuracy, _) = mean_std(&raw_values);
            rows.push(SummaryRow {
                label: label.to_string(),
                scheme,
                size,
                seeds: raw_values.len(),
                mean_running_max,
                std_running_max,
                mean_accuracy,
            });
        }
    }
    Ok(SummaryTable { rows })
}

impl SummaryTable {
    pub fn row(&self, label: &str, size: usize) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.label == label && r.size == size)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "label,scheme,size,seeds,mean_running_max,std_running_max,mean_accuracy\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.label,
                r.scheme,
                r.size,
                r.seeds,
                r.mean_running_max,
                r.std_running_max,
                r.mean_accuracy
            ));
        }
        out
    }

    /// One series per label with running-max means and standard deviations.
    pub fn to_plot_json(&self) -> String {
        let mut series: Vec<PlotSeries> = Vec::new();
        for r in &self.rows {
            let finite = |v: f64| if v.is_finite() { v } else { -1.0 };
            match series.last_mut() {
                Some(s) if s.label == r.label => {
                    s.sizes.push(r.size);
                    s.mean.push(finite(r.mean_running_max));
                    s.std.push(finite(r.std_running_max));
                }
                _ => series.push(PlotSeries {
                    label: &r.label,
                    scheme: r.scheme,
                    sizes: vec![r.size],
                    mean: vec![finite(r.mean_running_max)],
                    std: vec![finite(r.std_running_max)],
                }),
            }
        }
        let data = PlotData {
            rule: "running max of test accuracy over sizes <= size, mean/std across seeds",
            series,
        };
        let mut s = serde_json::to_string_pretty(&data).expect("plot data is serializable");
        s.push('\n');
        s
    }

    /// Writes `summary.csv` and `summary.json` into `dir`.
    pub fn save_in(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("summary.csv");
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join("summary.json");
        std::fs::write(&json, self.to_plot_json()).map_err(|e| Error::io(&json, e))
    }
}
