use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DrcfsError, Result};

/// Observed features plus outcome, the input to selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// n x m feature matrix.
    pub features: DMatrix<f64>,
    pub outcome: Vec<f64>,
    pub column_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, outcome: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        if features.nrows() != outcome.len() {
            return Err(DrcfsError::DimensionMismatch {
                expected: features.nrows(),
                got: outcome.len(),
            });
        }
        if features.ncols() != column_names.len() {
            return Err(DrcfsError::DimensionMismatch {
                expected: features.ncols(),
                got: column_names.len(),
            });
        }
        for (c, col) in features.column_iter().enumerate() {
            if let Some(r) = col.iter().position(|v| !v.is_finite()) {
                return Err(DrcfsError::NonFiniteInput { row: r, column: c });
            }
        }
        if let Some(r) = outcome.iter().position(|v| !v.is_finite()) {
            return Err(DrcfsError::NonFiniteInput {
                row: r,
                column: features.ncols(),
            });
        }
        Ok(Self {
            features,
            outcome,
            column_names,
        })
    }

    /// Builds a dataset with columns named `X1..Xm`.
    pub fn with_default_names(features: DMatrix<f64>, outcome: Vec<f64>) -> Result<Self> {
        let names = (1..=features.ncols()).map(|i| format!("X{i}")).collect();
        Self::new(features, outcome, names)
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Returns a copy with feature columns reordered by `order` (new column `i` is old `order[i]`).
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_features() {
            return Err(DrcfsError::DimensionMismatch {
                expected: self.n_features(),
                got: order.len(),
            });
        }
        let features = self.features.select_columns(order);
        let names = order.iter().map(|&i| self.column_names[i].clone()).collect();
        Ok(Self {
            features,
            outcome: self.outcome.clone(),
            column_names: names,
        })
    }
}
