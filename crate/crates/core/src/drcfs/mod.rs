//! Cross-fitted doubly robust feature selection.
//!
//! The full-conditioning scores are computed once; each feature then gets its
//! drop-one scores, the paired test on the per-observation differences, and
//! finally the Benjamini-Yekutieli step-up across all features.

pub mod folds;
pub mod score;
pub mod testing;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use folds::{make_folds, FoldPlan};
pub use score::{estimate_chi, score_theta, ChiEstimate, Conditioning, NuisanceSplit, ScoreConvention, ScoreSamples};
pub use testing::{by_adjust, harmonic, paired_t_test, Adjustment, TTest};

use crate::dataset::Dataset;
use crate::error::{DrcfsError, Result};
use crate::metrics::SelectionMetrics;
use crate::nuisance::{LearnerSpec, NuisanceLearner};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrcfsConfig {
    pub k: usize,
    pub q: f64,
    pub learner: LearnerSpec,
    pub convention: ScoreConvention,
    pub split: NuisanceSplit,
    pub seed: u64,
}

impl Default for DrcfsConfig {
    fn default() -> Self {
        Self {
            k: 5,
            q: 0.05,
            learner: LearnerSpec::default(),
            convention: ScoreConvention::Orthogonal,
            split: NuisanceSplit::Disjoint,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTestResult {
    pub name: String,
    pub theta0: f64,
    pub thetaj: f64,
    pub chi: f64,
    pub sigma0_sq: f64,
    pub sigmaj_sq: f64,
    #[serde(rename = "t")]
    pub t_statistic: f64,
    pub p_raw: f64,
    pub p_adj: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub results: Vec<FeatureTestResult>,
    pub q: f64,
    pub k: usize,
    pub seed: u64,
    pub fold_sizes: Vec<usize>,
    pub learner: LearnerSpec,
    pub convention: ScoreConvention,
    pub split: NuisanceSplit,
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<SelectionMetrics>,
}

impl SelectionReport {
    pub fn selected_mask(&self) -> Vec<bool> {
        self.results.iter().map(|r| r.selected).collect()
    }

    pub fn selected_names(&self) -> Vec<&str> {
        self.results.iter().filter(|r| r.selected).map(|r| r.name.as_str()).collect()
    }

    /// Attaches metrics against a ground-truth parent mask.
    pub fn score_against(&mut self, truth: &[bool]) -> Result<()> {
        self.metrics = Some(SelectionMetrics::compute(&self.selected_mask(), truth)?);
        Ok(())
    }
}

/// Runs selection with the configured learner.
pub fn run_drcfs(data: &Dataset, config: &DrcfsConfig) -> Result<SelectionReport> {
    run_drcfs_with(data, config, &config.learner)
}

/// Runs selection with an arbitrary nuisance learner; `config.learner` is only echoed.
pub fn run_drcfs_with(data: &Dataset, config: &DrcfsConfig, learner: &dyn NuisanceLearner) -> Result<SelectionReport> {
    let start = Instant::now();
    let m = data.n_features();
    if m < 2 {
        return Err(DrcfsError::InvalidConfig(format!("need at least 2 feature columns, got {m}")));
    }
    if !(config.q > 0.0 && config.q <= 1.0) {
        return Err(DrcfsError::InvalidConfig(format!("q = {} must lie in (0, 1]", config.q)));
    }
    let plan = make_folds(data.n_rows(), config.k, derive_seed(config.seed, &[0]))?;
    let nuisance_seed = derive_seed(config.seed, &[1]);

    let full = score_theta(data, &plan, Conditioning::All, learner, config.convention, config.split, nuisance_seed)
        .map_err(|e| e.in_feature("<all>"))?;
    let theta0 = full.theta();
    let sigma0_sq = full.sigma_sq();

    let per_feature: Vec<(f64, f64, f64, TTest)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let name = &data.column_names[j];
            let sj = score_theta(data, &plan, Conditioning::Drop(j), learner, config.convention, config.split, nuisance_seed)
                .map_err(|e| e.in_feature(name.clone()))?;
            let chi = estimate_chi(&full, &sj)?;
            let test = paired_t_test(&chi.differences)?;
            Ok((sj.theta(), sj.sigma_sq(), chi.chi_hat, test))
        })
        .collect::<Result<_>>()?;

    let p_raw: Vec<f64> = per_feature.iter().map(|(.., t)| t.p_value).collect();
    let adj = by_adjust(&p_raw, config.q)?;

    let results = per_feature
        .into_iter()
        .enumerate()
        .map(|(j, (thetaj, sigmaj_sq, chi, test))| FeatureTestResult {
            name: data.column_names[j].clone(),
            theta0,
            thetaj,
            chi,
            sigma0_sq,
            sigmaj_sq,
            t_statistic: test.t_statistic,
            p_raw: test.p_value,
            p_adj: adj.adjusted[j],
            selected: adj.adjusted[j] <= config.q,
        })
        .collect();

    Ok(SelectionReport {
        results,
        q: config.q,
        k: config.k,
        seed: config.seed,
        fold_sizes: plan.fold_sizes(),
        learner: config.learner.clone(),
        convention: config.convention,
        split: config.split,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        metrics: None,
    })
}
