//! Experiment orchestration: single runs, sweeps over `(scheme, size,
//! seed)` grids, persisted reports and summaries.

pub mod config;
pub mod oracles;
pub mod report;
pub mod summary;
pub mod train;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{ExperimentConfig, Scheme};
pub use report::{load_reports, RunReport, RunStatus};
pub use summary::{sweep_summary, SummaryRow, SummaryTable};
pub use train::{train_on_splits, train_run, RunOutput, Splits};

use crate::error::{Error, Result};

/// Directory holding per-run report files.
pub fn runs_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("runs")
}

/// Every `(scheme, size, seed)` cell, in config order.
pub fn grid(config: &ExperimentConfig) -> Vec<(config::Scheme, usize, u64)> {
    let mut cells = Vec::new();
    for &scheme in &config.schemes {
        for &size in &config.sizes {
            for &seed in &config.seeds {
                cells.push((scheme, size, seed));
            }
        }
    }
    cells
}

/// Runs every cell of the grid without touching the filesystem. Cells run in
/// parallel; each is single-threaded and deterministic, so the result does
/// not depend on scheduling.
pub fn run_grid(config: &ExperimentConfig) -> Result<Vec<RunOutput>> {
    config.validate()?;
    // Splits depend only on the seed; build each once and share it.
    let splits: Vec<(u64, Splits)> = config
        .seeds
        .par_iter()
        .map(|&seed| Splits::new(config, seed).map(|s| (seed, s)))
        .collect::<Result<_>>()?;
    grid(config)
        .into_par_iter()
        .map(|(scheme, size, seed)| {
            let s = &splits
                .iter()
                .find(|(sd, _)| *sd == seed)
                .expect("splits built for every seed")
                .1;
            train_on_splits(config, s, scheme, size, seed)
        })
        .collect()
}

/// Runs the grid and writes one report per cell under `<out_dir>/runs/`,
/// plus `summary.csv` and `summary.json` in `out_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunReport>> {
    let out_dir = &config.out_dir;
    let runs = runs_dir(out_dir);
    std::fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
    let outputs = run_grid(config)?;
    for out in &outputs {
        let path = out.report.save_in(&runs)?;
        if config.save_checkpoints {
            out.best_model.save(&path.with_extension("ckpt"))?;
        }
    }
    let reports: Vec<RunReport> = outputs.into_iter().map(|o| o.report).collect();
    sweep_summary(&reports)?.save_in(out_dir)?;
    Ok(reports)
}

/// Re-summarizes the reports persisted under `<out_dir>/runs/`.
pub fn summarize_dir(out_dir: &Path) -> Result<SummaryTable> {
    let reports = load_reports(&runs_dir(out_dir))?;
    let table = sweep_summary(&reports)?;
    table.save_in(out_dir)?;
    Ok(table)
}
