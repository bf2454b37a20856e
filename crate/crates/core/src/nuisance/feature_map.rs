use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DrcfsError, Result};

/// Basis expansion applied to the conditioning columns before fitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    #[default]
    Identity,
    /// All monomials of total degree `1..=degree`.
    Polynomial { degree: u32 },
    /// Explicit monomials; each term is a list of `(dataset column, exponent)`.
    /// Terms touching a column outside the conditioning set are dropped.
    Custom { terms: Vec<Vec<(usize, u32)>> },
}

impl FeatureMap {
    /// Parses `identity` or `poly:<degree>`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(FeatureMap::Identity);
        }
        if let Some(d) = s.strip_prefix("poly:") {
            let degree: u32 = d
                .parse()
                .map_err(|_| DrcfsError::InvalidConfig(format!("bad polynomial degree in {s:?}")))?;
            if degree == 0 {
                return Err(DrcfsError::InvalidConfig("polynomial degree must be >= 1".into()));
            }
            return Ok(FeatureMap::Polynomial { degree });
        }
        Err(DrcfsError::InvalidConfig(format!(
            "unknown feature map {s:?} (expected identity or poly:<d>)"
        )))
    }

    pub fn label(&self) -> String {
        match self {
            FeatureMap::Identity => "identity".into(),
            FeatureMap::Polynomial { degree } => format!("poly:{degree}"),
            FeatureMap::Custom { terms } => format!("custom:{}", terms.len()),
        }
    }

    /// Specializes the map to a conditioning set. `columns[i]` is the dataset
    /// column that arrives at input position `i`.
    pub fn bind(&self, columns: &[usize]) -> BoundMap {
        let d = columns.len();
        let terms = match self {
            FeatureMap::Identity => (0..d).map(|i| vec![(i, 1)]).collect(),
            FeatureMap::Polynomial { degree } => {
                let mut out = Vec::new();
                for deg in 1..=*degree {
                    monomials(d, deg, 0, &mut Vec::new(), &mut out);
                }
                out
            }
            FeatureMap::Custom { terms } => terms
                .iter()
                .filter_map(|term| {
                    term.iter()
                        .map(|&(col, e)| columns.iter().position(|&c| c == col).map(|p| (p, e)))
                        .collect::<Option<Vec<_>>>()
                })
                .filter(|t| !t.is_empty())
                .collect(),
        };
        BoundMap { input_dim: d, terms }
    }
}

/// Enumerates exponent vectors of total degree `deg` over inputs `start..d`.
fn monomials(d: usize, deg: u32, start: usize, cur: &mut Vec<(usize, u32)>, out: &mut Vec<Vec<(usize, u32)>>) {
    if deg == 0 {
        out.push(cur.clone());
        return;
    }
    for i in start..d {
        for e in (1..=deg).rev() {
            cur.push((i, e));
            monomials(d, deg - e, i + 1, cur, out);
            cur.pop();
        }
    }
}

/// A feature map resolved against a concrete input layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundMap {
    pub input_dim: usize,
    pub terms: Vec<Vec<(usize, u32)>>,
}

impl BoundMap {
    pub fn output_dim(&self) -> usize {
        self.terms.len()
    }

    pub fn apply_into(&self, row: &[f64], out: &mut [f64]) {
        for (slot, term) in out.iter_mut().zip(&self.terms) {
            *slot = term.iter().map(|&(i, e)| row[i].powi(e as i32)).product();
        }
    }

    /// Expands every row of `x`.
    pub fn design(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim {
            return Err(DrcfsError::DimensionMismatch {
                expected: self.input_dim,
                got: x.ncols(),
            });
        }
        let mut out = DMatrix::zeros(x.nrows(), self.output_dim());
        for (k, term) in self.terms.iter().enumerate() {
            for r in 0..x.nrows() {
                out[(r, k)] = term.iter().map(|&(i, e)| x[(r, i)].powi(e as i32)).product();
            }
        }
        Ok(out)
    }
}
