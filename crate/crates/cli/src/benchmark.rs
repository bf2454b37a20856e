//! Replicate sweeps: simulate, select, score, and aggregate per grid cell.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use drcfs_core::{run_drcfs, simulate_dataset, DgpConfig, DrcfsConfig, NuisanceLearner, SelectionMetrics};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Cell, RunConfig};

pub const CSV_COLUMNS: [&str; 11] = ["config_hash", "seed", "m", "n", "p_c", "p_h", "learner", "acc", "f1", "csi", "wall_ms"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub config_hash: String,
    pub cell: usize,
    pub seed: u64,
    pub outcome: Result<RunOutcome, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub metrics: SelectionMetrics,
    pub wall_ms: f64,
    pub selected: Vec<bool>,
    pub truth: Vec<bool>,
}

/// Mean and standard error over successful replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, se })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub config_hash: String,
    pub cell: Cell,
    pub replicates: usize,
    pub succeeded: usize,
    pub acc: Option<MeanSe>,
    pub f1: Option<MeanSe>,
    pub csi: Option<MeanSe>,
    pub wall_ms: Option<MeanSe>,
    /// Fraction of successful replicates selecting each column, keyed by column name.
    pub selection_frequency: BTreeMap<String, f64>,
    /// Fraction of successful replicates in which each column is a true parent.
    pub parent_frequency: BTreeMap<String, f64>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub rows: Vec<RunRow>,
    pub cells: Vec<CellSummary>,
}

impl BenchmarkResult {
    pub fn any_cell_wholly_failed(&self) -> bool {
        self.cells.iter().any(|c| c.succeeded == 0)
    }
}

fn run_one(cell: &Cell, seed: u64, deterministic: bool) -> Result<RunOutcome, String> {
    let start = Instant::now();
    let dgp = DgpConfig { seed, ..cell.dgp.clone() };
    let sim = simulate_dataset(&dgp).map_err(|e| e.to_string())?;
    let cfg = DrcfsConfig { seed, ..cell.drcfs.clone() };
    let report = run_drcfs(&sim.data, &cfg).map_err(|e| e.to_string())?;
    let selected = report.selected_mask();
    let metrics = SelectionMetrics::compute(&selected, &sim.observed_parent_mask).map_err(|e| e.to_string())?;
    let wall_ms = if deterministic { 0.0 } else { start.elapsed().as_secs_f64() * 1e3 };
    Ok(RunOutcome {
        metrics,
        wall_ms,
        selected,
        truth: sim.observed_parent_mask,
    })
}

/// Runs every (cell, replicate) pair; replicate `r` uses seed `seed ^ r`.
/// Failures are recorded per row and never stop other runs.
pub fn run_benchmark(config: &RunConfig) -> BenchmarkResult {
    let cells = config.grid.cells(&config.dgp, &config.drcfs);
    let hashes: Vec<String> = cells.iter().map(Cell::hash).collect();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..config.replicates as u64).map(move |r| (c, config.seed ^ r)))
        .collect();

    let rows: Vec<RunRow> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let outcome = run_one(&cells[c], seed, config.deterministic);
            if let Err(e) = &outcome {
                log::warn!("cell {} seed {seed}: {e}", hashes[c]);
            }
            RunRow {
                config_hash: hashes[c].clone(),
                cell: c,
                seed,
                outcome,
            }
        })
        .collect();

    let summaries = cells
        .into_iter()
        .enumerate()
        .map(|(c, cell)| summarize(c, cell, hashes[c].clone(), &rows))
        .collect();
    BenchmarkResult { rows, cells: summaries }
}

fn summarize(index: usize, cell: Cell, config_hash: String, rows: &[RunRow]) -> CellSummary {
    let mine: Vec<&RunRow> = rows.iter().filter(|r| r.cell == index).collect();
    let ok: Vec<&RunOutcome> = mine.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let stat = |f: fn(&RunOutcome) -> f64| MeanSe::of(&ok.iter().map(|o| f(o)).collect::<Vec<_>>());

    let mut selection_frequency = BTreeMap::new();
    let mut parent_frequency = BTreeMap::new();
    if !ok.is_empty() {
        let width = ok.iter().map(|o| o.selected.len()).max().unwrap_or(0);
        for j in 0..width {
            let name = format!("X{}", j + 1);
            let count = |mask: fn(&RunOutcome) -> &Vec<bool>| {
                ok.iter().filter(|o| mask(o).get(j).copied().unwrap_or(false)).count() as f64 / ok.len() as f64
            };
            selection_frequency.insert(name.clone(), count(|o| &o.selected));
            parent_frequency.insert(name, count(|o| &o.truth));
        }
    }

    CellSummary {
        config_hash,
        replicates: mine.len(),
        succeeded: ok.len(),
        acc: stat(|o| o.metrics.acc),
        f1: stat(|o| o.metrics.f1),
        csi: stat(|o| o.metrics.csi),
        wall_ms: stat(|o| o.wall_ms),
        selection_frequency,
        parent_frequency,
        failures: mine
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| Failure { seed: r.seed, error: e.clone() }))
            .collect(),
        cell,
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

/// Per-run rows followed by one `seed = mean` summary row per cell. Failed
/// runs leave the metric fields empty.
pub fn write_runs_csv<W: Write>(writer: W, result: &BenchmarkResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for (c, summary) in result.cells.iter().enumerate() {
        let d = &summary.cell.dgp;
        let learner = nuisance_label(&summary.cell.drcfs);
        let base = |seed: String| vec![summary.config_hash.clone(), seed, d.m.to_string(), d.n.to_string(), d.p_c.to_string(), d.p_h.to_string(), learner.clone()];
        for row in result.rows.iter().filter(|r| r.cell == c) {
            let mut rec = base(row.seed.to_string());
            match &row.outcome {
                Ok(o) => rec.extend([fmt(o.metrics.acc), fmt(o.metrics.f1), fmt(o.metrics.csi), fmt(o.wall_ms)]),
                Err(_) => rec.extend([String::new(), String::new(), String::new(), String::new()]),
            }
            w.write_record(&rec)?;
        }
        let mut rec = base("mean".into());
        let cellv = |m: Option<MeanSe>| m.map(|s| fmt(s.mean)).unwrap_or_default();
        rec.extend([cellv(summary.acc), cellv(summary.f1), cellv(summary.csi), cellv(summary.wall_ms)]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Tidy table: one row per (cell, column).
pub fn write_frequency_csv<W: Write>(writer: W, result: &BenchmarkResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["config_hash", "variable", "selection_frequency", "parent_frequency"])?;
    for s in &result.cells {
        for (name, freq) in &s.selection_frequency {
            w.write_record([s.config_hash.as_str(), name, &fmt(*freq), &fmt(s.parent_frequency[name])])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn nuisance_label(cfg: &DrcfsConfig) -> String {
    cfg.learner.label()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se() {
        let s = MeanSe::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(MeanSe::of(&[]).is_none());
        assert_eq!(MeanSe::of(&[4.0]).unwrap().se, 0.0);
    }

    fn small_config() -> RunConfig {
        RunConfig {
            dgp: DgpConfig::linear(4, 200, 0.5, 0),
            replicates: 3,
            deterministic: true,
            seed: 10,
            ..Default::default()
        }
    }

    #[test]
    fn rows_and_summary_rows() {
        let result = run_benchmark(&small_config());
        let mut buf = Vec::new();
        write_runs_csv(&mut buf, &result).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert_eq!(lines.len(), 1 + 3 + 1);
        assert!(lines[4].split(',').nth(1) == Some("mean"));
        let seeds: Vec<&str> = lines[1..4].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
        assert_eq!(seeds, ["10", "11", "8"]);
    }

    #[test]
    fn failing_cell_does_not_abort_siblings() {
        let mut cfg = small_config();
        // n = 3 cannot be split into 5 folds
        cfg.grid.n = vec![3, 200];
        let result = run_benchmark(&cfg);
        assert_eq!(result.cells.len(), 2);
        assert_eq!(result.cells[0].succeeded, 0);
        assert_eq!(result.cells[0].failures.len(), 3);
        assert_eq!(result.cells[1].succeeded, 3);
        assert!(result.any_cell_wholly_failed());
    }
}
