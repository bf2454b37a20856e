//! Honest random forest with locally linear leaves.
//!
//! Each tree draws a subsample, grows its split structure on one part and
//! solves the local estimating equation on the other part. A leaf stores the
//! ridge solution of `sum (phi - c)(phi - c)' b = sum m(V; phi - c)` over its
//! estimation samples (the mean target uses `y - ybar` in place of the moment),
//! so the forest's prediction is the average of per-tree local linear fits.

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::feature_map::{BoundMap, FeatureMap};
use super::linear::{solve_spd, LinearTarget};
use crate::error::{DrcfsError, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSpec {
    pub trees: usize,
    /// Fraction of each subsample used for the split structure.
    pub honest_fraction: f64,
    /// When false, structure and leaf estimates share the whole subsample.
    pub honest: bool,
    pub min_leaf: usize,
    pub subsample: f64,
    pub leaf_ridge: f64,
    /// Candidate split features per node; `None` uses `min(ceil(sqrt(d) + 20), d)`.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub map: FeatureMap,
}

impl Default for ForestSpec {
    fn default() -> Self {
        Self {
            trees: 100,
            honest_fraction: 0.5,
            honest: true,
            min_leaf: 5,
            subsample: 0.5,
            leaf_ridge: 1e-6,
            mtry: None,
            max_depth: None,
            map: FeatureMap::Identity,
        }
    }
}

/// Local solution stored at a node: `intercept + (z - center) . coef`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFit {
    pub intercept: f64,
    pub center: Vec<f64>,
    pub coef: Vec<f64>,
}

impl LocalFit {
    fn eval(&self, z: &[f64]) -> f64 {
        self.intercept
            + self
                .coef
                .iter()
                .zip(&self.center)
                .zip(z)
                .map(|((b, c), v)| b * (v - c))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// `(input feature, threshold, left child, right child)`; left takes `x <= threshold`.
    pub split: Option<(usize, f64, usize, usize)>,
    pub estimate: Option<LocalFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub structure_samples: Vec<usize>,
    pub estimation_samples: Vec<usize>,
}

impl Tree {
    fn predict(&self, x: &[f64], z: &[f64]) -> Option<f64> {
        let mut node = 0;
        let mut best = self.nodes[0].estimate.as_ref();
        while let Some((f, thr, l, r)) = self.nodes[node].split {
            node = if x[f] <= thr { l } else { r };
            if let Some(e) = self.nodes[node].estimate.as_ref() {
                best = Some(e);
            }
        }
        best.map(|e| e.eval(z))
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub map: BoundMap,
    pub basis_mean: Vec<f64>,
    pub basis_scale: Vec<f64>,
    pub trees: Vec<Tree>,
    pub honest_fraction: f64,
    pub min_leaf: usize,
    pub subsample: f64,
    /// Leaves whose local system was degenerate and fell back to a leaf mean.
    pub degenerate_leaves: usize,
}

impl ForestModel {
    pub fn input_dim(&self) -> usize {
        self.map.input_dim
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.map.input_dim {
            return Err(DrcfsError::DimensionMismatch {
                expected: self.map.input_dim,
                got: row.len(),
            });
        }
        let z = self.basis(row);
        let (sum, count) = self
            .trees
            .iter()
            .filter_map(|t| t.predict(row, &z))
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count == 0 {
            return Err(DrcfsError::TooFewObservations { needed: 1, got: 0 });
        }
        Ok(sum / count as f64)
    }

    fn basis(&self, row: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.map.output_dim()];
        self.map.apply_into(row, &mut z);
        for ((v, mu), s) in z.iter_mut().zip(&self.basis_mean).zip(&self.basis_scale) {
            *v = (*v - mu) / s;
        }
        z
    }
}

struct Training<'a> {
    x: &'a DMatrix<f64>,
    z: DMatrix<f64>,
    /// Pseudo-response used for splitting.
    response: Vec<f64>,
    y: &'a [f64],
    target: LinearTarget,
    spec: &'a ForestSpec,
    mtry: usize,
}

pub fn fit_forest(x: &DMatrix<f64>, y: &[f64], target: LinearTarget, spec: &ForestSpec, columns: &[usize], seed: u64) -> Result<ForestModel> {
    let n = x.nrows();
    if y.len() != n {
        return Err(DrcfsError::DimensionMismatch { expected: n, got: y.len() });
    }
    if spec.trees == 0 || spec.min_leaf == 0 {
        return Err(DrcfsError::InvalidConfig("forest needs trees >= 1 and min_leaf >= 1".into()));
    }
    if !(spec.subsample > 0.0 && spec.subsample <= 1.0) || !(spec.honest_fraction > 0.0 && spec.honest_fraction < 1.0) {
        return Err(DrcfsError::InvalidConfig("forest fractions must lie in (0, 1]".into()));
    }
    let per_tree = ((n as f64) * spec.subsample).floor() as usize;
    let needed = if spec.honest { 2 } else { 1 };
    if per_tree < needed {
        return Err(DrcfsError::TooFewObservations { needed, got: per_tree });
    }
    if let Some(r) = y.iter().position(|v| !v.is_finite()) {
        return Err(DrcfsError::NonFiniteInput { row: r, column: x.ncols() });
    }

    let map = spec.map.bind(columns);
    let mut z = map.design(x)?;
    let nf = n as f64;
    let mut basis_mean = Vec::new();
    let mut basis_scale = Vec::new();
    for mut col in z.column_iter_mut() {
        let mu = col.sum() / nf;
        let sd = (col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / nf).sqrt();
        let s = if sd > 1e-12 { sd } else { 1.0 };
        col.apply(|v| *v = (*v - mu) / s);
        basis_mean.push(mu);
        basis_scale.push(s);
    }
    if let Some(c) = (0..z.ncols()).find(|&c| z.column(c).iter().any(|v| !v.is_finite())) {
        let r = z.column(c).iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(DrcfsError::NonFiniteInput { row: r, column: c });
    }

    let response = match target {
        LinearTarget::Mean => y.to_vec(),
        LinearTarget::Riesz(moment) => y.iter().map(|&v| moment.weight(v)).collect(),
    };
    let d = x.ncols();
    let mtry = spec
        .mtry
        .unwrap_or_else(|| ((d as f64).sqrt() + 20.0).ceil() as usize)
        .clamp(1, d.max(1));
    let training = Training {
        x,
        z,
        response,
        y,
        target,
        spec,
        mtry,
    };

    let built: Vec<(Tree, usize)> = (0..spec.trees)
        .into_par_iter()
        .map(|t| training.grow(rng_for(seed, &[t as u64]), per_tree))
        .collect();
    let degenerate_leaves = built.iter().map(|(_, d)| d).sum();
    Ok(ForestModel {
        map,
        basis_mean,
        basis_scale,
        trees: built.into_iter().map(|(t, _)| t).collect(),
        honest_fraction: spec.honest_fraction,
        min_leaf: spec.min_leaf,
        subsample: spec.subsample,
        degenerate_leaves,
    })
}

impl Training<'_> {
    fn grow(&self, mut rng: ChaCha8Rng, per_tree: usize) -> (Tree, usize) {
        let n = self.x.nrows();
        let sample = index::sample(&mut rng, n, per_tree).into_vec();
        let (structure, estimation) = if self.spec.honest {
            let cut = ((per_tree as f64 * self.spec.honest_fraction).round() as usize).clamp(1, per_tree - 1);
            (sample[..cut].to_vec(), sample[cut..].to_vec())
        } else {
            (sample.clone(), sample)
        };

        let mut nodes = vec![TreeNode { split: None, estimate: None }];
        // (node id, structure samples, depth)
        let mut stack = vec![(0usize, structure.clone(), 0usize)];
        let mut features: Vec<usize> = (0..self.x.ncols()).collect();
        while let Some((id, samples, depth)) = stack.pop() {
            if samples.len() < 2 * self.spec.min_leaf || self.spec.max_depth.is_some_and(|m| depth >= m) {
                continue;
            }
            features.shuffle(&mut rng);
            let Some((f, thr)) = self.best_split(&samples, &features[..self.mtry]) else {
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| self.x[(i, f)] <= thr);
            let l = nodes.len();
            nodes.push(TreeNode { split: None, estimate: None });
            nodes.push(TreeNode { split: None, estimate: None });
            nodes[id].split = Some((f, thr, l, l + 1));
            stack.push((l, left, depth + 1));
            stack.push((l + 1, right, depth + 1));
        }

        let mut degenerate = 0;
        let mut stack = vec![(0usize, estimation.clone())];
        while let Some((id, samples)) = stack.pop() {
            if samples.is_empty() {
                continue;
            }
            let (fit, was_degenerate) = self.local_fit(&samples);
            if was_degenerate && nodes[id].split.is_none() {
                degenerate += 1;
            }
            nodes[id].estimate = Some(fit);
            if let Some((f, thr, l, r)) = nodes[id].split {
                let (left, right): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| self.x[(i, f)] <= thr);
                stack.push((l, left));
                stack.push((r, right));
            }
        }
        (
            Tree {
                nodes,
                structure_samples: structure,
                estimation_samples: estimation,
            },
            degenerate,
        )
    }

    /// Variance-reduction split over the candidate features.
    fn best_split(&self, samples: &[usize], features: &[usize]) -> Option<(usize, f64)> {
        let min_leaf = self.spec.min_leaf;
        let total: f64 = samples.iter().map(|&i| self.response[i]).sum();
        let k = samples.len();
        let parent_score = total * total / k as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = samples.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]));
            let mut left_sum = 0.0;
            for pos in 0..k - 1 {
                left_sum += self.response[order[pos]];
                let n_left = pos + 1;
                if n_left < min_leaf || k - n_left < min_leaf {
                    continue;
                }
                let (a, b) = (self.x[(order[pos], f)], self.x[(order[pos + 1], f)]);
                if a == b {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (k - n_left) as f64;
                if score > parent_score + 1e-12 && best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, f, 0.5 * (a + b)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    /// Local ridge solution over `samples`. Returns whether it degenerated to a mean.
    fn local_fit(&self, samples: &[usize]) -> (LocalFit, bool) {
        let k = samples.len();
        let kf = k as f64;
        let p = self.z.ncols();
        let mean_y = samples.iter().map(|&i| self.y[i]).sum::<f64>() / kf;
        let intercept = match self.target {
            LinearTarget::Mean => mean_y,
            LinearTarget::Riesz(moment) => samples.iter().map(|&i| moment.weight(self.y[i])).sum::<f64>() / kf,
        };
        let constant = |degenerate| {
            (
                LocalFit {
                    intercept,
                    center: Vec::new(),
                    coef: Vec::new(),
                },
                degenerate,
            )
        };
        if p == 0 {
            return constant(false);
        }
        if k < p + 2 {
            return constant(true);
        }
        let mut center = vec![0.0; p];
        for &i in samples {
            for (c, v) in center.iter_mut().zip(self.z.row(i).iter()) {
                *c += v;
            }
        }
        center.iter_mut().for_each(|c| *c /= kf);

        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        let mut u = DVector::<f64>::zeros(p);
        for &i in samples {
            for j in 0..p {
                u[j] = self.z[(i, j)] - center[j];
            }
            gram.ger(1.0 / kf, &u, &u, 1.0);
            let w = match self.target {
                LinearTarget::Mean => self.y[i] - mean_y,
                LinearTarget::Riesz(moment) => moment.weight(self.y[i]),
            };
            rhs.axpy(w / kf, &u, 1.0);
        }
        let spread: Vec<bool> = (0..p).map(|j| gram[(j, j)] > 1e-12).collect();
        if spread.iter().all(|s| !s) {
            return constant(true);
        }
        for j in 0..p {
            gram[(j, j)] += self.spec.leaf_ridge;
        }
        match solve_spd(&gram, &rhs) {
            Ok(coef) => {
                let coef = coef.iter().zip(&spread).map(|(b, &s)| if s { *b } else { 0.0 }).collect();
                (LocalFit { intercept, center, coef }, false)
            }
            Err(_) => constant(true),
        }
    }
}
