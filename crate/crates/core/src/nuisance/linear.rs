//! Ridge-regularized linear nuisances.
//!
//! Both nuisances are linear in a standardized basis `z = (phi(x) - mean) / scale`
//! plus an unpenalized intercept. The mean model solves
//! `(E_n[z z'] + lambda I) beta = E_n[(y - ybar) z]`; the Riesz model solves
//! `(E_n[z z'] + lambda I) gamma = E_n[m(V; z)]` with intercept `E_n[m(V; 1)]`,
//! the minimizer of `E_n[alpha^2 - 2 m(V; alpha)]` over the same class.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::feature_map::{BoundMap, FeatureMap};
use super::Moment;
use crate::error::{DrcfsError, Result};
use crate::rng::rng_for;

/// Relative pivot below which a Cholesky step counts as singular.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaChoice {
    Fixed { lambda: f64 },
    /// K-fold CV over `grid * trace(E_n[z z']) / p`.
    CrossValidated { folds: usize, grid: Vec<f64> },
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::CrossValidated {
            folds: 5,
            grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LinearSpec {
    #[serde(default)]
    pub map: FeatureMap,
    #[serde(default)]
    pub lambda: LambdaChoice,
}

impl LinearSpec {
    pub fn fixed(lambda: f64) -> Self {
        Self {
            map: FeatureMap::Identity,
            lambda: LambdaChoice::Fixed { lambda },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub map: BoundMap,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub ridge_lambda: f64,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
}

impl LinearModel {
    pub fn input_dim(&self) -> usize {
        self.map.input_dim
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.map.input_dim {
            return Err(DrcfsError::DimensionMismatch {
                expected: self.map.input_dim,
                got: row.len(),
            });
        }
        let mut phi = vec![0.0; self.map.output_dim()];
        self.map.apply_into(row, &mut phi);
        Ok(self.intercept
            + phi
                .iter()
                .zip(&self.coefficients)
                .zip(self.feature_mean.iter().zip(&self.feature_scale))
                .map(|((v, b), (mu, s))| (v - mu) / s * b)
                .sum::<f64>())
    }

    pub fn predict_matrix(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let z = self.standardized_design(x)?;
        let beta = DVector::from_column_slice(&self.coefficients);
        Ok((z * beta).iter().map(|v| v + self.intercept).collect())
    }

    /// The standardized basis matrix this model was fit in.
    pub fn standardized_design(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut z = self.map.design(x)?;
        standardize_with(&mut z, &self.feature_mean, &self.feature_scale);
        Ok(z)
    }
}

struct Standardized {
    z: DMatrix<f64>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    constant: Vec<usize>,
}

fn standardize(mut phi: DMatrix<f64>) -> Standardized {
    let n = phi.nrows() as f64;
    let mut mean = Vec::with_capacity(phi.ncols());
    let mut scale = Vec::with_capacity(phi.ncols());
    let mut constant = Vec::new();
    for (k, col) in phi.column_iter().enumerate() {
        let mu = col.sum() / n;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd <= 1e-12 * mu.abs().max(1.0) {
            constant.push(k);
            scale.push(1.0);
        } else {
            scale.push(sd);
        }
        mean.push(mu);
    }
    standardize_with(&mut phi, &mean, &scale);
    for &k in &constant {
        phi.column_mut(k).fill(0.0);
    }
    Standardized {
        z: phi,
        mean,
        scale,
        constant,
    }
}

fn standardize_with(phi: &mut DMatrix<f64>, mean: &[f64], scale: &[f64]) {
    for (k, mut col) in phi.column_iter_mut().enumerate() {
        let (mu, s) = (mean[k], scale[k]);
        col.apply(|v| *v = (*v - mu) / s);
    }
}

/// Cholesky solve of a symmetric positive (semi)definite system. On a
/// vanishing pivot, returns the indices whose pivots collapsed.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> std::result::Result<DVector<f64>, Vec<usize>> {
    let p = a.nrows();
    let mut l = DMatrix::<f64>::zeros(p, p);
    let mut bad = Vec::new();
    for j in 0..p {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        let reference = a[(j, j)].abs().max(1.0);
        if d <= PIVOT_TOL * reference {
            bad.push(j);
            continue;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..p {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    if !bad.is_empty() {
        return Err(bad);
    }
    let mut y = DVector::zeros(p);
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = DVector::zeros(p);
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in (i + 1)..p {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// What the fitted linear function targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearTarget {
    Mean,
    Riesz(Moment),
}

/// Fits a linear model for `target` on training data `x` (rows = observations).
/// `seed` drives the CV fold assignment when lambda is cross-validated.
pub fn fit_linear(x: &DMatrix<f64>, y: &[f64], target: LinearTarget, spec: &LinearSpec, columns: &[usize], seed: u64) -> Result<LinearModel> {
    let n = x.nrows();
    if y.len() != n {
        return Err(DrcfsError::DimensionMismatch { expected: n, got: y.len() });
    }
    if n < 2 {
        return Err(DrcfsError::TooFewObservations { needed: 2, got: n });
    }
    let map = spec.map.bind(columns);
    let phi = map.design(x)?;
    if let Some((r, c)) = first_non_finite(&phi).or_else(|| y.iter().position(|v| !v.is_finite()).map(|r| (r, x.ncols()))) {
        return Err(DrcfsError::NonFiniteInput { row: r, column: c });
    }
    let Standardized { z, mean, scale, constant } = standardize(phi);
    let p = z.ncols();

    let lambda = match &spec.lambda {
        LambdaChoice::Fixed { lambda } => {
            if !(*lambda >= 0.0) {
                return Err(DrcfsError::InvalidConfig(format!("ridge lambda {lambda} < 0")));
            }
            *lambda
        }
        LambdaChoice::CrossValidated { folds, grid } => select_lambda(&z, y, target, *folds, grid, seed)?,
    };

    if lambda == 0.0 && !constant.is_empty() {
        return Err(DrcfsError::IllConditioned { columns: constant });
    }

    let nf = n as f64;
    let mut gram = z.tr_mul(&z) / nf;
    for k in 0..p {
        gram[(k, k)] += lambda;
    }
    let (rhs, intercept) = match target {
        LinearTarget::Mean => {
            let ybar = y.iter().sum::<f64>() / nf;
            let centered = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
            (z.tr_mul(&centered) / nf, ybar)
        }
        LinearTarget::Riesz(moment) => {
            let ones = DVector::from_element(n, 1.0);
            let rhs = DVector::from_iterator(p, z.column_iter().map(|col| moment.mean_value(y, col.as_slice())));
            (rhs, moment.mean_value(y, ones.as_slice()))
        }
    };
    let coef = if p == 0 {
        DVector::zeros(0)
    } else {
        solve_spd(&gram, &rhs).map_err(|columns| DrcfsError::IllConditioned { columns })?
    };
    // constant columns carry no signal
    let mut coefficients: Vec<f64> = coef.iter().copied().collect();
    for &k in &constant {
        coefficients[k] = 0.0;
    }
    Ok(LinearModel {
        map,
        coefficients,
        intercept,
        ridge_lambda: lambda,
        feature_mean: mean,
        feature_scale: scale,
    })
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for (c, col) in m.column_iter().enumerate() {
        if let Some(r) = col.iter().position(|v| !v.is_finite()) {
            return Some((r, c));
        }
    }
    None
}

/// Per-fold sufficient statistics over the augmented basis `[1, z]`.
struct FoldStats {
    count: f64,
    gram: DMatrix<f64>,
    cross: DVector<f64>,
    yy: f64,
}

fn select_lambda(z: &DMatrix<f64>, y: &[f64], target: LinearTarget, folds: usize, grid: &[f64], seed: u64) -> Result<f64> {
    let n = z.nrows();
    let p = z.ncols();
    if grid.is_empty() {
        return Err(DrcfsError::InvalidConfig("empty lambda grid".into()));
    }
    let folds = folds.clamp(2, n.max(2));
    if p == 0 || n < folds {
        return Ok(grid[0]);
    }
    let scale = (0..p).map(|k| z.column(k).norm_squared()).sum::<f64>() / (n as f64 * p as f64);
    let scale = if scale > 0.0 { scale } else { 1.0 };

    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, &[0xC0FF]));
    let mut stats: Vec<FoldStats> = (0..folds)
        .map(|_| FoldStats {
            count: 0.0,
            gram: DMatrix::zeros(p + 1, p + 1),
            cross: DVector::zeros(p + 1),
            yy: 0.0,
        })
        .collect();
    let mut basis = DVector::zeros(p + 1);
    for (pos, &i) in idx.iter().enumerate() {
        let s = &mut stats[pos % folds];
        basis[0] = 1.0;
        for k in 0..p {
            basis[k + 1] = z[(i, k)];
        }
        s.count += 1.0;
        s.gram.ger(1.0, &basis, &basis, 1.0);
        // both targets reduce to E[y * basis] for the product moment
        let m = match target {
            LinearTarget::Mean => y[i],
            LinearTarget::Riesz(moment) => moment.weight(y[i]),
        };
        s.cross.axpy(m, &basis, 1.0);
        s.yy += y[i] * y[i];
    }
    let total_gram: DMatrix<f64> = stats.iter().fold(DMatrix::zeros(p + 1, p + 1), |a, s| a + &s.gram);
    let total_cross: DVector<f64> = stats.iter().fold(DVector::zeros(p + 1), |a, s| a + &s.cross);
    let total_count: f64 = stats.iter().map(|s| s.count).sum();

    let mut best = (f64::INFINITY, grid[0] * scale);
    for &g in grid {
        let lambda = g * scale;
        let mut loss = 0.0;
        for s in &stats {
            let train_n = total_count - s.count;
            let mut a = &total_gram - &s.gram;
            for k in 1..=p {
                a[(k, k)] += train_n * lambda;
            }
            let b = &total_cross - &s.cross;
            let Ok(coef) = solve_spd(&a, &b) else {
                loss = f64::INFINITY;
                break;
            };
            let quad = coef.dot(&(&s.gram * &coef));
            let lin = coef.dot(&s.cross);
            loss += match target {
                // held-out squared error
                LinearTarget::Mean => s.yy - 2.0 * lin + quad,
                // held-out Riesz loss E[a^2 - 2 m(V; a)]
                LinearTarget::Riesz(_) => quad - 2.0 * lin,
            };
        }
        if loss < best.0 {
            best = (loss, lambda);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn noiseless_line_is_recovered() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.3 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let m = fit_linear(&col(&xs), &ys, LinearTarget::Mean, &LinearSpec::fixed(0.0), &[0], 0).unwrap();
        // raw-scale slope = coefficient / scale
        assert_abs_diff_eq!(m.coefficients[0] / m.feature_scale[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.predict_row(&[0.0]).unwrap(), 1.0, epsilon = 1e-10);
        for (x, y) in xs.iter().zip(&ys) {
            assert_abs_diff_eq!(m.predict_row(&[*x]).unwrap(), *y, epsilon = 1e-8);
        }
    }

    #[test]
    fn constant_outcome_gives_zero_slope() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let m = fit_linear(&col(&xs), &[3.5; 10], LinearTarget::Mean, &LinearSpec::fixed(0.0), &[0], 0).unwrap();
        assert_abs_diff_eq!(m.coefficients[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.intercept, 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.predict_row(&[100.0]).unwrap(), 3.5, epsilon = 1e-10);
    }

    #[test]
    fn symmetric_parabola_has_zero_linear_slope() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let m = fit_linear(&col(&xs), &ys, LinearTarget::Mean, &LinearSpec::fixed(0.0), &[0], 0).unwrap();
        assert_abs_diff_eq!(m.coefficients[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.intercept, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn riesz_balanced_sign_feature() {
        // E[x^2] gamma = E[y x] with x = +-1, y = 2x gives gamma = 2
        let xs = [-1.0, 1.0, -1.0, 1.0];
        let ys = [-2.0, 2.0, -2.0, 2.0];
        let m = fit_linear(&col(&xs), &ys, LinearTarget::Riesz(Moment::OutcomeProduct), &LinearSpec::fixed(0.0), &[0], 0).unwrap();
        // unit scale, so standardized and raw slopes coincide
        assert_abs_diff_eq!(m.feature_scale[0], 1.0);
        assert_abs_diff_eq!(m.coefficients[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_system_names_columns() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 5.0, 2.0, 4.0, 5.0, 3.0, 6.0, 5.0, 4.0, 8.0, 5.0]);
        let y = [1.0, 2.0, 3.0, 4.0];
        match fit_linear(&x, &y, LinearTarget::Mean, &LinearSpec::fixed(0.0), &[0, 1, 2], 0) {
            Err(DrcfsError::IllConditioned { columns }) => assert_eq!(columns, vec![2]),
            other => panic!("{other:?}"),
        }
        // drop the constant column; the remaining pair is collinear
        let x2 = x.columns(0, 2).into_owned();
        match fit_linear(&x2, &y, LinearTarget::Mean, &LinearSpec::fixed(0.0), &[0, 1], 0) {
            Err(DrcfsError::IllConditioned { columns }) => assert_eq!(columns, vec![1]),
            other => panic!("{other:?}"),
        }
        // ridge rescues both
        assert!(fit_linear(&x, &y, LinearTarget::Mean, &LinearSpec::fixed(0.1), &[0, 1, 2], 0).is_ok());
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let xs = [0.0, 1.0, 2.0];
        let m = fit_linear(&col(&xs), &[0.0, 1.0, 2.0], LinearTarget::Mean, &LinearSpec::fixed(0.0), &[0], 0).unwrap();
        assert!(matches!(m.predict_row(&[1.0, 2.0]), Err(DrcfsError::DimensionMismatch { .. })));
    }

    #[test]
    fn cross_validation_picks_from_grid() {
        let n = 200;
        let x = DMatrix::from_fn(n, 3, |r, c| ((r * 7 + c * 13) % 17) as f64 - 8.0);
        let y: Vec<f64> = (0..n).map(|r| x[(r, 0)] - 0.5 * x[(r, 2)]).collect();
        let spec = LinearSpec::default();
        let m = fit_linear(&x, &y, LinearTarget::Mean, &spec, &[0, 1, 2], 3).unwrap();
        // noiseless data favours the smallest penalty
        assert!(m.ridge_lambda < 1e-3, "lambda {}", m.ridge_lambda);
    }
}
