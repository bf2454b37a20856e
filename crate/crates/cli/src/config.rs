//! Run configuration: a JSON document with flat flag overrides on top.

use std::path::{Path, PathBuf};

use drcfs_core::dgp::{MixtureComponent, NoiseSpec};
use drcfs_core::{DgpConfig, DrcfsConfig, LearnerSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{IngestOptions, OnMissing};
use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Select,
    Benchmark,
    OracleCheck,
}

/// Sweep axes; an empty list means "use the base DGP value".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub p_c: Vec<f64>,
    pub p_h: Vec<f64>,
    pub noise: Vec<NoiseSpec>,
    pub mixture: Vec<Vec<MixtureComponent>>,
    pub learner: Vec<LearnerSpec>,
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

/// One point of the sweep, without seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dgp: DgpConfig,
    pub drcfs: DrcfsConfig,
}

impl Cell {
    /// First 16 hex digits of the SHA-256 of the cell's canonical JSON.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.dgp.seed = 0;
        canonical.drcfs.seed = 0;
        let json = serde_json::to_vec(&canonical).expect("cell serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

impl Grid {
    pub fn cells(&self, dgp: &DgpConfig, drcfs: &DrcfsConfig) -> Vec<Cell> {
        let mut out = Vec::new();
        for m in axis(&self.m, dgp.m) {
            for n in axis(&self.n, dgp.n) {
                for p_c in axis(&self.p_c, dgp.p_c) {
                    for p_h in axis(&self.p_h, dgp.p_h) {
                        for noise in axis(&self.noise, dgp.noise.clone()) {
                            for mixture in axis(&self.mixture, dgp.transform_mixture.clone()) {
                                for learner in axis(&self.learner, drcfs.learner.clone()) {
                                    out.push(Cell {
                                        dgp: DgpConfig {
                                            m,
                                            n,
                                            p_c,
                                            p_h,
                                            noise: noise.clone(),
                                            transform_mixture: mixture.clone(),
                                            ..dgp.clone()
                                        },
                                        drcfs: DrcfsConfig { learner, ..drcfs.clone() },
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Ground-truth document to score a selection against.
    pub truth: Option<PathBuf>,
    pub ingest: IngestOptions,
    pub dgp: DgpConfig,
    pub drcfs: DrcfsConfig,
    pub grid: Grid,
    pub replicates: usize,
    pub threads: Option<usize>,
    pub seed: u64,
    /// Zero out wall-clock fields so artifacts are byte-reproducible.
    pub deterministic: bool,
    /// Random discrete models to check when no model file is given.
    pub oracle_models: usize,
    pub oracle_features: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            input: None,
            out: None,
            truth: None,
            ingest: IngestOptions::default(),
            dgp: DgpConfig::linear(10, 2000, 0.3, 0),
            drcfs: DrcfsConfig::default(),
            grid: Grid::default(),
            replicates: 1,
            threads: None,
            seed: 0,
            deterministic: false,
            oracle_models: 100,
            oracle_features: 4,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Pushes the top-level seed into the DGP and selection configs.
    pub fn resolve_seeds(&mut self) {
        self.dgp.seed = self.seed;
        self.drcfs.seed = self.seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.replicates < 1 {
            return Err(CliError::Usage("replicates must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("threads must be at least 1".into()));
        }
        if self.drcfs.k < 2 {
            return Err(CliError::Usage(format!("k = {} must be at least 2", self.drcfs.k)));
        }
        if !(self.drcfs.q > 0.0 && self.drcfs.q <= 1.0) {
            return Err(CliError::Usage(format!("q = {} must lie in (0, 1]", self.drcfs.q)));
        }
        if let Some(input) = &self.input {
            if !input.exists() {
                return Err(CliError::Usage(format!("input {} does not exist", input.display())));
            }
        }
        Ok(())
    }

    pub fn on_missing(&self) -> OnMissing {
        self.ingest.on_missing
    }
}

/// Wraps an artifact with the tool version and the resolved configuration.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a RunConfig,
    #[serde(flatten)]
    pub body: T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(config: &'a RunConfig, body: T) -> Self {
        Self {
            tool: "drcfs",
            version: TOOL_VERSION,
            config,
            body,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_document_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"replicates": 5, "drcfs": {"q": 0.1}, "dgp": {"m": 4, "n": 100, "p_c": 0.5}}"#).unwrap();
        assert_eq!(cfg.replicates, 5);
        assert_eq!(cfg.drcfs.k, 5);
        assert_eq!(cfg.drcfs.q, 0.1);
        assert_eq!(cfg.dgp.m, 4);
    }

    #[test]
    fn grid_cells_are_a_product() {
        let grid = Grid {
            m: vec![5, 10],
            p_c: vec![0.1, 0.2, 0.3],
            ..Default::default()
        };
        let base = RunConfig::default();
        let cells = grid.cells(&base.dgp, &base.drcfs);
        assert_eq!(cells.len(), 6);
        let hashes: std::collections::HashSet<_> = cells.iter().map(Cell::hash).collect();
        assert_eq!(hashes.len(), 6);
    }

    #[test]
    fn hash_ignores_seed() {
        let base = RunConfig::default();
        let mut a = Grid::default().cells(&base.dgp, &base.drcfs).remove(0);
        let h = a.hash();
        a.dgp.seed = 99;
        a.drcfs.seed = 7;
        assert_eq!(a.hash(), h);
        a.dgp.n += 1;
        assert_ne!(a.hash(), h);
    }
}
