use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{DrcfsError, Result};
use crate::rng::rng_for;

/// A balanced random partition of the rows into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index of each observation.
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// Rows held out in fold `l`.
    pub fn test_rows(&self, l: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] == l).collect()
    }

    /// Rows of the complement of fold `l`.
    pub fn train_rows(&self, l: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] != l).collect()
    }
}

pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(DrcfsError::InvalidConfig(format!("k = {k}; need at least 2 folds")));
    }
    if k > n {
        return Err(DrcfsError::InvalidConfig(format!("k = {k} exceeds n = {n}")));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng_for(seed, &[0xF01D]));
    let mut assignment = vec![0; n];
    for (pos, &row) in rows.iter().enumerate() {
        assignment[row] = pos % k;
    }
    Ok(FoldPlan { k, assignment, seed })
}
