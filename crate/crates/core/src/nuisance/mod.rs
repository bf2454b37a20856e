//! Nuisance estimation: the conditional mean and the Riesz representer of the
//! outcome-product moment, each fit on a conditioning set of columns.

pub mod feature_map;
pub mod forest;
pub mod linear;

use std::fmt::Debug;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use feature_map::{BoundMap, FeatureMap};
pub use forest::{fit_forest, ForestModel, ForestSpec};
pub use linear::{fit_linear, LambdaChoice, LinearModel, LinearSpec, LinearTarget};

use crate::error::{DrcfsError, Result};
use crate::rng::derive_seed;

/// Linear moment functionals of the form `m(V; h) = w(Y) * h(X_S)` where `S`
/// is the conditioning set. Selection only needs `w(Y) = Y`, the moment whose
/// expectation at the regression function is `E[Y E[Y | X_S]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    OutcomeProduct,
}

impl Moment {
    pub fn weight(self, y: f64) -> f64 {
        match self {
            Moment::OutcomeProduct => y,
        }
    }

    /// `m(V; h)` for a single observation.
    pub fn evaluate(self, y: f64, h: f64) -> f64 {
        self.weight(y) * h
    }

    /// `E_n[m(V; h)]` for `h` given by its values at the observations.
    pub fn mean_value(self, y: &[f64], h: &[f64]) -> f64 {
        y.iter().zip(h).map(|(&a, &b)| self.evaluate(a, b)).sum::<f64>() / y.len() as f64
    }
}

/// A fitted function of the conditioning columns.
pub trait Predictor: Send + Sync + Debug {
    fn input_dim(&self) -> usize;

    fn predict(&self, row: &[f64]) -> Result<f64>;

    fn predict_matrix(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(DrcfsError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut row = vec![0.0; x.ncols()];
        (0..x.nrows())
            .map(|r| {
                for (c, slot) in row.iter_mut().enumerate() {
                    *slot = x[(r, c)];
                }
                self.predict(&row)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearModel),
    Forest(ForestModel),
}

impl Predictor for FittedModel {
    fn input_dim(&self) -> usize {
        match self {
            FittedModel::Linear(m) => m.input_dim(),
            FittedModel::Forest(m) => m.input_dim(),
        }
    }

    fn predict(&self, row: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Linear(m) => m.predict_row(row),
            FittedModel::Forest(m) => m.predict_row(row),
        }
    }

    fn predict_matrix(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        match self {
            FittedModel::Linear(m) => m.predict_matrix(x),
            FittedModel::Forest(m) => (0..x.nrows())
                .map(|r| m.predict_row(&x.row(r).iter().copied().collect::<Vec<_>>()))
                .collect(),
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned JSON envelope for a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub model: FittedModel,
}

impl ModelDocument {
    pub fn new(model: FittedModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| DrcfsError::InvalidConfig(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(s).map_err(|e| DrcfsError::InvalidConfig(e.to_string()))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(DrcfsError::InvalidConfig(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc)
    }
}

/// The pair of nuisances fit on one training fold for one conditioning set.
#[derive(Debug)]
pub struct NuisancePair {
    pub mean_model: Box<dyn Predictor>,
    pub riesz_model: Box<dyn Predictor>,
    /// Dataset columns both models condition on, in input order.
    pub target_columns: Vec<usize>,
}

pub const ROLE_MEAN: u64 = 1;
pub const ROLE_RIESZ: u64 = 2;

/// Fits the two nuisances on training rows. `x` holds those rows restricted
/// to `columns`.
pub trait NuisanceLearner: Send + Sync {
    fn fit_mean_model(&self, x: &DMatrix<f64>, y: &[f64], columns: &[usize], seed: u64) -> Result<Box<dyn Predictor>>;

    fn fit_riesz_model(&self, x: &DMatrix<f64>, y: &[f64], columns: &[usize], seed: u64) -> Result<Box<dyn Predictor>>;

    /// Both nuisances on the same rows, with role-specific seeds so that CV
    /// folds (linear) or subsamples (forest) differ between them.
    fn fit_pair(&self, x: &DMatrix<f64>, y: &[f64], columns: &[usize], seed: u64) -> Result<NuisancePair> {
        Ok(NuisancePair {
            mean_model: self.fit_mean_model(x, y, columns, derive_seed(seed, &[ROLE_MEAN]))?,
            riesz_model: self.fit_riesz_model(x, y, columns, derive_seed(seed, &[ROLE_RIESZ]))?,
            target_columns: columns.to_vec(),
        })
    }

    fn label(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum LearnerSpec {
    Linear(LinearSpec),
    Forest(ForestSpec),
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec::Linear(LinearSpec::default())
    }
}

impl LearnerSpec {
    pub fn map(&self) -> &FeatureMap {
        match self {
            LearnerSpec::Linear(s) => &s.map,
            LearnerSpec::Forest(s) => &s.map,
        }
    }

    pub fn with_map(mut self, map: FeatureMap) -> Self {
        match &mut self {
            LearnerSpec::Linear(s) => s.map = map,
            LearnerSpec::Forest(s) => s.map = map,
        }
        self
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LearnerSpec::Linear(_) => "linear",
            LearnerSpec::Forest(_) => "forest",
        }
    }

    pub fn fit_mean(&self, x: &DMatrix<f64>, y: &[f64], columns: &[usize], seed: u64) -> Result<FittedModel> {
        self.fit(x, y, LinearTarget::Mean, columns, seed)
    }

    pub fn fit_riesz(&self, x: &DMatrix<f64>, y: &[f64], moment: Moment, columns: &[usize], seed: u64) -> Result<FittedModel> {
        self.fit(x, y, LinearTarget::Riesz(moment), columns, seed)
    }

    fn fit(&self, x: &DMatrix<f64>, y: &[f64], target: LinearTarget, columns: &[usize], seed: u64) -> Result<FittedModel> {
        Ok(match self {
            LearnerSpec::Linear(s) => FittedModel::Linear(fit_linear(x, y, target, s, columns, seed)?),
            LearnerSpec::Forest(s) => FittedModel::Forest(fit_forest(x, y, target, s, columns, seed)?),
        })
    }
}

impl NuisanceLearner for LearnerSpec {
    fn fit_mean_model(&self, x: &DMatrix<f64>, y: &[f64], columns: &[usize], seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.fit_mean(x, y, columns, seed)?))
    }

    fn fit_riesz_model(&self, x: &DMatrix<f64>, y: &[f64], columns: &[usize], seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.fit_riesz(x, y, Moment::OutcomeProduct, columns, seed)?))
    }

    fn label(&self) -> String {
        format!("{}({})", self.kind(), self.map().label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_document_round_trips() {
        let x = DMatrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let y = [1.0, 3.0, 5.0, 7.0, 9.0];
        let spec = LearnerSpec::Linear(LinearSpec::fixed(0.0));
        let model = spec.fit_mean(&x, &y, &[0], 0).unwrap();
        let doc = ModelDocument::new(model.clone());
        let back = ModelDocument::from_json(&doc.to_json().unwrap()).unwrap();
        assert_eq!(back.model, model);
        assert!((back.model.predict(&[10.0]).unwrap() - 21.0).abs() < 1e-9);

        let mut bad = serde_json::to_value(&doc).unwrap();
        bad["format_version"] = 99.into();
        assert!(ModelDocument::from_json(&bad.to_string()).is_err());
    }

    #[test]
    fn learner_spec_json_shape() {
        let spec: LearnerSpec = serde_json::from_str(r#"{"learner":"forest","trees":10}"#).unwrap();
        match &spec {
            LearnerSpec::Forest(f) => {
                assert_eq!(f.trees, 10);
                assert_eq!(f.min_leaf, 5);
            }
            _ => panic!(),
        }
        assert_eq!(spec.label(), "forest(identity)");
        let lin: LearnerSpec = serde_json::from_str(r#"{"learner":"linear"}"#).unwrap();
        assert_eq!(lin, LearnerSpec::default());
    }

    #[test]
    fn moment_mean_value() {
        assert_eq!(Moment::OutcomeProduct.mean_value(&[1.0, 2.0], &[3.0, 4.0]), 5.5);
    }
}
