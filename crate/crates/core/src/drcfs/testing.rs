//! Paired t-test and Benjamini-Yekutieli adjustment.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{DrcfsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t_statistic: f64,
    pub p_value: f64,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    /// Zero spread with a nonzero mean; the p-value is the limiting 0.
    pub degenerate: bool,
}

/// Two-sided one-sample t-test of `mean(d) = 0`, i.e. the paired test on the
/// per-observation differences.
pub fn paired_t_test(differences: &[f64]) -> Result<TTest> {
    let n = differences.len();
    if n < 2 {
        return Err(DrcfsError::TooFewObservations { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = differences.iter().sum::<f64>() / nf;
    let var = differences.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 {
        if mean == 0.0 {
            return Ok(TTest { t_statistic: 0.0, p_value: 1.0, mean, sd, degenerate: false });
        }
        log::warn!("paired t-test: zero spread with mean {mean}; reporting p = 0");
        return Ok(TTest {
            t_statistic: mean.signum() * f64::INFINITY,
            p_value: 0.0,
            mean,
            sd,
            degenerate: true,
        });
    }
    let t = mean / (sd / nf.sqrt());
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| DrcfsError::InvalidConfig(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(TTest { t_statistic: t, p_value: p, mean, sd, degenerate: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub adjusted: Vec<f64>,
    pub rejected: Vec<bool>,
}

/// Harmonic number `c(m) = sum_{i=1}^m 1/i`.
pub fn harmonic(m: usize) -> f64 {
    (1..=m).map(|i| 1.0 / i as f64).sum()
}

/// Benjamini-Yekutieli step-up procedure at level `q`.
pub fn by_adjust(p_values: &[f64], q: f64) -> Result<Adjustment> {
    let m = p_values.len();
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(DrcfsError::InvalidConfig(format!("p-value {p} outside [0, 1]")));
    }
    if m == 0 {
        return Ok(Adjustment { adjusted: vec![], rejected: vec![] });
    }
    let c = harmonic(m);
    let mf = m as f64;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));

    // step-up: largest rank whose p-value clears its threshold
    let cutoff = (1..=m)
        .rev()
        .find(|&k| p_values[order[k - 1]] <= q * k as f64 / (mf * c));

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (1..=m).rev() {
        let i = order[rank - 1];
        running = running.min(p_values[i] * mf * c / rank as f64);
        adjusted[i] = running.min(1.0);
    }
    let mut rejected = vec![false; m];
    if let Some(k) = cutoff {
        for &i in &order[..k] {
            rejected[i] = true;
        }
    }
    Ok(Adjustment { adjusted, rejected })
}
