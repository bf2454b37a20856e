//! Subcommand bodies. Each takes a fully resolved [`RunConfig`].

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use drcfs_core::oracle::{check_identities, random_binary_scm, DiscreteScm, LemmaCheck};
use drcfs_core::rng::derive_seed;
use drcfs_core::{run_drcfs, simulate_dataset, DrcfsError, SelectionReport};
use serde::Serialize;
use serde_json::json;

use crate::benchmark::{run_benchmark, write_frequency_csv, write_runs_csv};
use crate::config::{Envelope, RunConfig};
use crate::ingest::{ingest_csv, write_csv, IngestError};
use crate::CliError;

fn require_out(cfg: &RunConfig, what: &str) -> Result<PathBuf, CliError> {
    cfg.out
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{what} needs --out <dir>")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes `data.csv` and `ground_truth.json` into the output directory.
pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let out = require_out(cfg, "simulate")?;
    fs::create_dir_all(&out)?;
    let sim = simulate_dataset(&cfg.dgp)?;
    write_csv(BufWriter::new(File::create(out.join("data.csv"))?), &sim.data, "Y")?;
    let truth = sim.ground_truth(&cfg.dgp);
    write_json(&out.join("ground_truth.json"), &Envelope::new(cfg, json!({ "ground_truth": truth })))?;
    log::info!(
        "simulated {} rows x {} observed features; parents of Y: {:?}",
        sim.data.n_rows(),
        sim.data.n_features(),
        truth.parents
    );
    Ok(())
}

/// Reads the parent names from a ground-truth document, with or without envelope.
fn truth_mask(path: &Path, columns: &[String]) -> Result<Vec<bool>, CliError> {
    let text = fs::read_to_string(path)?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let parents = doc
        .get("ground_truth")
        .unwrap_or(&doc)
        .get("parents")
        .and_then(|p| p.as_array())
        .ok_or_else(|| CliError::Usage(format!("{}: no \"parents\" list", path.display())))?;
    let names: Vec<&str> = parents.iter().filter_map(|v| v.as_str()).collect();
    Ok(columns.iter().map(|c| names.contains(&c.as_str())).collect())
}

fn print_table(report: &SelectionReport) {
    eprintln!("{:<12} {:>10} {:>10} {:>12} {:>12} {:>4}", "feature", "chi", "t", "p_raw", "p_adj", "sel");
    for r in &report.results {
        eprintln!(
            "{:<12} {:>10.4} {:>10.3} {:>12.4e} {:>12.4e} {:>4}",
            r.name,
            r.chi,
            r.t_statistic,
            r.p_raw,
            r.p_adj,
            if r.selected { "*" } else { "" }
        );
    }
    if let Some(m) = &report.metrics {
        eprintln!("acc {:.3}  f1 {:.3}  csi {:.3}", m.acc, m.f1, m.csi);
    }
}

pub fn select(cfg: &RunConfig) -> Result<SelectionReport, CliError> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("select needs --input <csv>".into()))?;
    let ingested = ingest_csv(input, &cfg.ingest)?;
    if ingested.rows_dropped > 0 {
        eprintln!("warning: dropped {} rows with missing values", ingested.rows_dropped);
    }
    let data = ingested.dataset;
    let mut report = run_drcfs(&data, &cfg.drcfs)?;
    if cfg.deterministic {
        report.wall_ms = 0.0;
    }
    if let Some(truth) = &cfg.truth {
        report.score_against(&truth_mask(truth, &data.column_names)?)?;
    }
    print_table(&report);

    let doc = Envelope::new(cfg, json!({ "report": report }));
    match &cfg.out {
        Some(path) => write_json(path, &doc)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, &doc)?;
            writeln!(lock)?;
        }
    }
    Ok(report)
}

/// Writes `runs.csv`, `selection_frequency.csv`, and `summary.json`.
pub fn benchmark(cfg: &RunConfig) -> Result<(), CliError> {
    let out = require_out(cfg, "benchmark")?;
    fs::create_dir_all(&out)?;
    let result = run_benchmark(cfg);
    write_runs_csv(BufWriter::new(File::create(out.join("runs.csv"))?), &result)?;
    write_frequency_csv(BufWriter::new(File::create(out.join("selection_frequency.csv"))?), &result)?;
    write_json(&out.join("summary.json"), &Envelope::new(cfg, json!({ "cells": result.cells })))?;
    for c in &result.cells {
        let show = |m: Option<crate::benchmark::MeanSe>| m.map_or("n/a".to_string(), |s| format!("{:.3} ± {:.3}", s.mean, s.se));
        eprintln!(
            "{}  m={} n={} p_c={} p_h={}  ok {}/{}  acc {}  f1 {}  csi {}",
            c.config_hash, c.cell.dgp.m, c.cell.dgp.n, c.cell.dgp.p_c, c.cell.dgp.p_h, c.succeeded, c.replicates,
            show(c.acc), show(c.f1), show(c.csi)
        );
    }
    if result.any_cell_wholly_failed() {
        let failed: Vec<&str> = result.cells.iter().filter(|c| c.succeeded == 0).map(|c| c.config_hash.as_str()).collect();
        return Err(CliError::Benchmark(format!("every replicate failed in cell(s) {}", failed.join(", "))));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct OracleSummary {
    pub models: usize,
    pub acde_checks: usize,
    pub parents_identified: usize,
    pub checks: Vec<LemmaCheck>,
}

/// Checks the identities on a model file, or on random binary models.
pub fn oracle_check(cfg: &RunConfig) -> Result<OracleSummary, CliError> {
    let models: Vec<DiscreteScm> = match &cfg.input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
                path: path.display().to_string(),
                source,
            })?;
            vec![DiscreteScm::from_json(&text).map_err(IngestError::Invalid)?]
        }
        None => (0..cfg.oracle_models as u64)
            .map(|i| random_binary_scm(derive_seed(cfg.seed, &[i]), cfg.oracle_features))
            .collect(),
    };
    let checks = models
        .iter()
        .map(check_identities)
        .collect::<Result<Vec<_>, DrcfsError>>()?;
    let summary = OracleSummary {
        models: checks.len(),
        acde_checks: checks.iter().map(|c| c.acde_checks).sum(),
        parents_identified: checks.iter().filter(|c| c.parents_identified()).count(),
        checks,
    };
    eprintln!(
        "{} models, {} ACDE pairs agreed, parents identified in {}",
        summary.models, summary.acde_checks, summary.parents_identified
    );
    let doc = Envelope::new(cfg, json!({ "oracle": summary }));
    match &cfg.out {
        Some(path) => write_json(path, &doc)?,
        None => println!("{}", serde_json::to_string_pretty(&doc)?),
    }
    Ok(summary)
}
