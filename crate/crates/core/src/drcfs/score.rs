use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use crate::dataset::Dataset;
use crate::error::{DrcfsError, Result};
use crate::nuisance::{NuisanceLearner, NuisancePair, ROLE_MEAN, ROLE_RIESZ};
use crate::rng::{derive_seed, rng_for};

/// Which per-observation score is evaluated on each held-out fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ScoreConvention {
    /// `Y g + a (Y - g)`: the orthogonal score with `m(V; g) = Y g`.
    #[default]
    #[serde(rename = "eq3", alias = "orthogonal")]
    Orthogonal,
    /// `Y g - Y a - a g`, the expression printed in the algorithm listing.
    #[serde(rename = "paper", alias = "paper_literal")]
    Literal,
}

impl ScoreConvention {
    pub fn score(self, y: f64, g: f64, a: f64) -> f64 {
        match self {
            ScoreConvention::Orthogonal => y * g + a * (y - g),
            ScoreConvention::Literal => y * g - y * a - a * g,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ScoreConvention::Orthogonal => "eq3",
            ScoreConvention::Literal => "paper",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "eq3" | "orthogonal" => Ok(ScoreConvention::Orthogonal),
            "paper" | "literal" | "paper-literal" => Ok(ScoreConvention::Literal),
            _ => Err(DrcfsError::InvalidConfig(format!("unknown convention {s:?} (expected eq3 or paper)"))),
        }
    }
}

/// Which training rows each nuisance sees inside a fold complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NuisanceSplit {
    /// Mean and Riesz models are fit on disjoint random halves, so their
    /// estimation errors are independent given the fold.
    #[default]
    Disjoint,
    /// Both models are fit on the whole complement.
    Shared,
}

impl NuisanceSplit {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "disjoint" => Ok(NuisanceSplit::Disjoint),
            "shared" => Ok(NuisanceSplit::Shared),
            _ => Err(DrcfsError::InvalidConfig(format!("unknown nuisance split {s:?} (expected disjoint or shared)"))),
        }
    }
}

/// Conditioning set for a nuisance pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    All,
    Drop(usize),
}

impl Conditioning {
    pub fn columns(self, m: usize) -> Vec<usize> {
        match self {
            Conditioning::All => (0..m).collect(),
            Conditioning::Drop(j) => (0..m).filter(|&c| c != j).collect(),
        }
    }
}

/// Cross-fitted per-observation scores for one target parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSamples {
    /// Score of each observation, indexed like the dataset rows.
    pub values: Vec<f64>,
    pub fold: Vec<usize>,
    pub convention: ScoreConvention,
    pub fold_means: Vec<f64>,
    /// Per-fold mean squared deviation from the fold mean.
    pub fold_variances: Vec<f64>,
}

impl ScoreSamples {
    /// Average of the fold means.
    pub fn theta(&self) -> f64 {
        self.fold_means.iter().sum::<f64>() / self.fold_means.len() as f64
    }

    /// Average of the fold variances.
    pub fn sigma_sq(&self) -> f64 {
        self.fold_variances.iter().sum::<f64>() / self.fold_variances.len() as f64
    }
}

fn select(x: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| x[(rows[r], cols[c])])
}

fn fit_fold(
    data: &Dataset,
    train: &[usize],
    columns: &[usize],
    learner: &dyn NuisanceLearner,
    split: NuisanceSplit,
    seed: u64,
) -> Result<NuisancePair> {
    let rows_of = |rows: &[usize]| {
        let x = select(&data.features, rows, columns);
        let y: Vec<f64> = rows.iter().map(|&i| data.outcome[i]).collect();
        (x, y)
    };
    match split {
        NuisanceSplit::Shared => {
            let (x, y) = rows_of(train);
            learner.fit_pair(&x, &y, columns, seed)
        }
        NuisanceSplit::Disjoint => {
            // the halves depend only on the fold seed, so every conditioning set shares them
            let mut order = train.to_vec();
            order.shuffle(&mut rng_for(seed, &[0]));
            let (a, b) = order.split_at(order.len() / 2);
            let (xa, ya) = rows_of(a);
            let (xb, yb) = rows_of(b);
            Ok(NuisancePair {
                mean_model: learner.fit_mean_model(&xa, &ya, columns, derive_seed(seed, &[ROLE_MEAN]))?,
                riesz_model: learner.fit_riesz_model(&xb, &yb, columns, derive_seed(seed, &[ROLE_RIESZ]))?,
                target_columns: columns.to_vec(),
            })
        }
    }
}

/// Fits nuisances on each fold complement and scores the held-out fold.
/// Fold `l` uses nuisance seed `derive(seed, l)` regardless of the
/// conditioning set, so column permutations keep seeds coupled.
pub fn score_theta(
    data: &Dataset,
    plan: &FoldPlan,
    conditioning: Conditioning,
    learner: &dyn NuisanceLearner,
    convention: ScoreConvention,
    split: NuisanceSplit,
    seed: u64,
) -> Result<ScoreSamples> {
    let n = data.n_rows();
    if plan.n() != n {
        return Err(DrcfsError::DimensionMismatch { expected: n, got: plan.n() });
    }
    let columns = conditioning.columns(data.n_features());
    if columns.is_empty() {
        return Err(DrcfsError::InvalidConfig("conditioning set is empty".into()));
    }
    let y = &data.outcome;
    let mut values = vec![0.0; n];
    let mut fold_means = Vec::with_capacity(plan.k);
    let mut fold_variances = Vec::with_capacity(plan.k);

    for l in 0..plan.k {
        let train = plan.train_rows(l);
        let test = plan.test_rows(l);
        let pair = fit_fold(data, &train, &columns, learner, split, derive_seed(seed, &[l as u64])).map_err(|e| e.in_fold(l))?;

        let x_test = select(&data.features, &test, &columns);
        let g = pair.mean_model.predict_matrix(&x_test).map_err(|e| e.in_fold(l))?;
        let a = pair.riesz_model.predict_matrix(&x_test).map_err(|e| e.in_fold(l))?;

        let mut sum = 0.0;
        for (pos, &i) in test.iter().enumerate() {
            let psi = convention.score(y[i], g[pos], a[pos]);
            if !psi.is_finite() {
                return Err(DrcfsError::NonFiniteInput { row: i, column: data.n_features() }.in_fold(l));
            }
            values[i] = psi;
            sum += psi;
        }
        let mean = sum / test.len() as f64;
        let var = test.iter().map(|&i| (values[i] - mean).powi(2)).sum::<f64>() / test.len() as f64;
        fold_means.push(mean);
        fold_variances.push(var);
    }

    Ok(ScoreSamples {
        values,
        fold: plan.assignment.clone(),
        convention,
        fold_means,
        fold_variances,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiEstimate {
    pub chi_hat: f64,
    /// `psi_0,i - psi_j,i` for every observation.
    pub differences: Vec<f64>,
}

/// `theta_0 - theta_j` together with the paired per-observation differences.
pub fn estimate_chi(score0: &ScoreSamples, scorej: &ScoreSamples) -> Result<ChiEstimate> {
    if score0.convention != scorej.convention {
        return Err(DrcfsError::ConventionMismatch);
    }
    if score0.values.len() != scorej.values.len() {
        return Err(DrcfsError::DimensionMismatch {
            expected: score0.values.len(),
            got: scorej.values.len(),
        });
    }
    if score0.fold != scorej.fold {
        return Err(DrcfsError::InvalidConfig("score vectors come from different fold plans".into()));
    }
    let differences: Vec<f64> = score0.values.iter().zip(&scorej.values).map(|(a, b)| a - b).collect();
    Ok(ChiEstimate {
        chi_hat: score0.theta() - scorej.theta(),
        differences,
    })
}
