//! Selection quality against a ground-truth parent mask.

use serde::{Deserialize, Serialize};

use crate::error::{DrcfsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `(TP + TN) / total`.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 1.0,
            t => (self.tp + self.tn) as f64 / t as f64,
        }
    }

    /// `2 TP / (2 TP + FP + FN)`; 1 when nothing is positive on either side.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }

    /// Critical success index `TP / (TP + FP + FN)`; 1 when nothing is positive.
    pub fn csi(&self) -> f64 {
        let denom = self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            self.tp as f64 / denom as f64
        }
    }
}

pub fn confusion(selected: &[bool], truth: &[bool]) -> Result<Confusion> {
    if selected.len() != truth.len() {
        return Err(DrcfsError::DimensionMismatch {
            expected: truth.len(),
            got: selected.len(),
        });
    }
    let mut c = Confusion::default();
    for (&s, &t) in selected.iter().zip(truth) {
        match (s, t) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub confusion: Confusion,
    pub acc: f64,
    pub f1: f64,
    pub csi: f64,
}

impl SelectionMetrics {
    pub fn compute(selected: &[bool], truth: &[bool]) -> Result<Self> {
        let c = confusion(selected, truth)?;
        Ok(Self {
            confusion: c,
            acc: c.accuracy(),
            f1: c.f1(),
            csi: c.csi(),
        })
    }
}
