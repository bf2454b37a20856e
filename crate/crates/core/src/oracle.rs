//! Exact computations on small discrete structural causal models.
//!
//! Features are discrete nodes with conditional probability tables; the outcome
//! is a deterministic table of its parents plus independent discrete noise.
//! Everything here is brute-force enumeration over the joint support and is
//! meant as a reference for the estimators.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{DrcfsError, Result};
use crate::rng::rng_for;

pub const ENUMERATION_CAP: u128 = 10_000_000;
const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteNode {
    pub name: String,
    pub support: Vec<f64>,
    /// Indices of earlier feature nodes.
    #[serde(default)]
    pub parents: Vec<usize>,
    /// One row per parent configuration (mixed radix, first parent most
    /// significant); each row is a distribution over `support`.
    pub cpt: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteOutcome {
    pub parents: Vec<usize>,
    /// Value of `f(pa)` per parent configuration.
    pub table: Vec<f64>,
    /// `(value, probability)` pairs of the additive noise.
    pub noise: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteScm {
    pub features: Vec<DiscreteNode>,
    pub outcome: DiscreteOutcome,
}

fn config_index(parents: &[usize], cell: &[usize], supports: &[usize]) -> usize {
    parents.iter().fold(0, |acc, &p| acc * supports[p] + cell[p])
}

impl DiscreteScm {
    pub fn from_json(s: &str) -> Result<Self> {
        let scm: Self = serde_json::from_str(s).map_err(|e| DrcfsError::InvalidScm(e.to_string()))?;
        scm.validate()?;
        Ok(scm)
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    fn support_sizes(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.support.len()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(DrcfsError::InvalidScm(s));
        let sizes = self.support_sizes();
        for (i, node) in self.features.iter().enumerate() {
            if node.support.is_empty() {
                return bad(format!("{}: empty support", node.name));
            }
            if let Some(&p) = node.parents.iter().find(|&&p| p >= i) {
                return bad(format!("{}: parent {p} is not an earlier node", node.name));
            }
            let rows: usize = node.parents.iter().map(|&p| sizes[p]).product();
            if node.cpt.len() != rows {
                return bad(format!("{}: expected {rows} CPT rows, got {}", node.name, node.cpt.len()));
            }
            for row in &node.cpt {
                if row.len() != node.support.len() || row.iter().any(|&p| !(p >= 0.0)) {
                    return bad(format!("{}: malformed CPT row", node.name));
                }
                if (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return bad(format!("{}: CPT row does not sum to 1", node.name));
                }
            }
        }
        let o = &self.outcome;
        if let Some(&p) = o.parents.iter().find(|&&p| p >= self.features.len()) {
            return bad(format!("outcome parent {p} out of range"));
        }
        let rows: usize = o.parents.iter().map(|&p| sizes[p]).product();
        if o.table.len() != rows {
            return bad(format!("outcome table needs {rows} entries, got {}", o.table.len()));
        }
        if o.noise.is_empty() || o.noise.iter().any(|&(_, p)| !(p >= 0.0)) {
            return bad("outcome noise must be a nonempty distribution".into());
        }
        if (o.noise.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad("outcome noise probabilities do not sum to 1".into());
        }
        Ok(())
    }

    fn cell_count(&self) -> u128 {
        self.features.iter().map(|f| f.support.len() as u128).product()
    }

    fn check_cap(&self) -> Result<()> {
        let cells = self.cell_count() * self.outcome.noise.len() as u128;
        if cells > ENUMERATION_CAP {
            return Err(DrcfsError::SupportTooLarge { cells, cap: ENUMERATION_CAP });
        }
        Ok(())
    }

    /// Visits every joint feature configuration with its probability under the
    /// model where nodes with `interventions[i] = Some(v)` are set to support index `v`.
    fn for_each_cell(&self, interventions: &[Option<usize>], mut visit: impl FnMut(&[usize], f64)) {
        let sizes = self.support_sizes();
        let m = sizes.len();
        let mut cell = vec![0usize; m];
        loop {
            let mut prob = 1.0;
            for (i, node) in self.features.iter().enumerate() {
                prob *= match interventions.get(i).copied().flatten() {
                    Some(v) => f64::from(u8::from(cell[i] == v)),
                    None => node.cpt[config_index(&node.parents, &cell, &sizes)][cell[i]],
                };
                if prob == 0.0 {
                    break;
                }
            }
            visit(&cell, prob);
            // odometer increment, last node fastest
            let mut i = m;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                cell[i] += 1;
                if cell[i] < sizes[i] {
                    break;
                }
                cell[i] = 0;
            }
        }
    }

    fn structural_value(&self, cell: &[usize]) -> f64 {
        let sizes = self.support_sizes();
        self.outcome.table[config_index(&self.outcome.parents, cell, &sizes)]
    }

    /// `E[Y | X = cell]`, averaging over the noise table.
    fn outcome_mean_at(&self, cell: &[usize]) -> f64 {
        let f = self.structural_value(cell);
        self.outcome.noise.iter().map(|&(e, p)| p * (f + e)).sum()
    }

    /// `E[Y | do(interventions), given]` by enumeration; `given` entries are
    /// support indices to condition on.
    pub fn mean_outcome(&self, interventions: &[Option<usize>], given: &[Option<usize>]) -> Result<f64> {
        self.check_cap()?;
        let mut mass = 0.0;
        let mut acc = 0.0;
        self.for_each_cell(interventions, |cell, p| {
            if p == 0.0 {
                return;
            }
            let matches = given.iter().enumerate().all(|(i, g)| g.is_none_or(|v| cell[i] == v));
            if matches {
                mass += p;
                acc += p * self.outcome_mean_at(cell);
            }
        });
        if mass <= 0.0 {
            return Err(DrcfsError::ZeroProbability);
        }
        Ok(acc / mass)
    }

    fn support_index(&self, node: usize, value: f64) -> Result<usize> {
        self.features[node]
            .support
            .iter()
            .position(|&s| s == value)
            .ok_or_else(|| DrcfsError::InvalidScm(format!("{value} not in the support of {}", self.features[node].name)))
    }

    /// Per-cell probabilities, `E[Y|x]`, and `E[Y|x_{-j}]` for every `j`.
    fn conditional_tables(&self) -> Result<Tables> {
        self.check_cap()?;
        let sizes = self.support_sizes();
        let m = sizes.len();
        let mut cells = Vec::new();
        let mut probs = Vec::new();
        let mut full = Vec::new();
        self.for_each_cell(&[], |cell, p| {
            cells.push(cell.to_vec());
            probs.push(p);
            full.push(self.outcome_mean_at(cell));
        });
        let mut dropped = Vec::with_capacity(m);
        for j in 0..m {
            let key = |cell: &[usize]| cell.iter().enumerate().filter(|&(i, _)| i != j).fold(0u64, |acc, (i, &v)| acc * sizes[i] as u64 + v as u64);
            let mut groups: HashMap<u64, (f64, f64)> = HashMap::new();
            for ((cell, &p), &g) in cells.iter().zip(&probs).zip(&full) {
                let e = groups.entry(key(cell)).or_default();
                e.0 += p * g;
                e.1 += p;
            }
            dropped.push(
                cells
                    .iter()
                    .map(|cell| {
                        let (num, den) = groups[&key(cell)];
                        if den > 0.0 {
                            num / den
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            );
        }
        Ok(Tables { cells, probs, full, dropped })
    }
}

struct Tables {
    cells: Vec<Vec<usize>>,
    probs: Vec<f64>,
    /// `E[Y | x]` per cell.
    full: Vec<f64>,
    /// `dropped[j][cell] = E[Y | x_{-j}]`.
    dropped: Vec<Vec<f64>>,
}

/// `E[(E[Y|X] - E[Y|X_{-j}])^2]` by enumeration.
pub fn exact_chi(scm: &DiscreteScm, j: usize) -> Result<f64> {
    if j >= scm.feature_count() {
        return Err(DrcfsError::InvalidScm(format!("feature {j} out of range")));
    }
    let t = scm.conditional_tables()?;
    Ok(t.probs
        .iter()
        .zip(&t.full)
        .zip(&t.dropped[j])
        .map(|((p, g), h)| p * (g - h).powi(2))
        .sum())
}

/// `chi_j = E[Y E[Y|X]] - E[Y E[Y|X_{-j}]]` for every feature, enumerating the
/// noise explicitly, then checked against [`exact_chi`] within 1e-12.
pub fn chi_from_moments(scm: &DiscreteScm) -> Result<Vec<f64>> {
    let t = scm.conditional_tables()?;
    let noise = &scm.outcome.noise;
    // E[Y h(X)] = sum_x p(x) sum_e p(e) (f(x) + e) h(x)
    let moment = |h: &[f64]| -> f64 {
        t.cells
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let f = scm.structural_value(cell);
                t.probs[c] * noise.iter().map(|&(e, pe)| pe * (f + e) * h[c]).sum::<f64>()
            })
            .sum()
    };
    let theta0 = moment(&t.full);
    let mut out = Vec::with_capacity(scm.feature_count());
    for j in 0..scm.feature_count() {
        let chi = theta0 - moment(&t.dropped[j]);
        let direct = exact_chi(scm, j)?;
        if (chi - direct).abs() > IDENTITY_TOL {
            return Err(DrcfsError::IdentityViolation(format!(
                "feature {j}: moment route {chi} vs direct route {direct}"
            )));
        }
        out.push(chi);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcdeResult {
    /// Difference of interventional means.
    pub interventional: f64,
    /// Difference of observational conditional means.
    pub observational: f64,
}

impl AcdeResult {
    pub fn value(&self) -> f64 {
        self.interventional
    }
}

/// `E[Y | do(x_j, ctx)] - E[Y | do(x_j', ctx)]` with `context` listing the
/// values of all other features in order. Both the mutilated-model path and
/// the conditional-mean path are computed and must agree within 1e-12.
pub fn exact_acde(scm: &DiscreteScm, j: usize, x_j: f64, x_j_alt: f64, context: &[f64]) -> Result<AcdeResult> {
    let m = scm.feature_count();
    if j >= m {
        return Err(DrcfsError::InvalidScm(format!("feature {j} out of range")));
    }
    if context.len() != m - 1 {
        return Err(DrcfsError::DimensionMismatch { expected: m - 1, got: context.len() });
    }
    let mut setting = Vec::with_capacity(m);
    let mut ctx = context.iter();
    for i in 0..m {
        if i == j {
            setting.push(None);
        } else {
            let v = *ctx.next().expect("context length checked");
            setting.push(Some(scm.support_index(i, v)?));
        }
    }
    let with = |v: usize| {
        let mut s = setting.clone();
        s[j] = Some(v);
        s
    };
    let a = with(scm.support_index(j, x_j)?);
    let b = with(scm.support_index(j, x_j_alt)?);

    let interventional = scm.mean_outcome(&a, &[])? - scm.mean_outcome(&b, &[])?;
    let observational = scm.mean_outcome(&[], &a)? - scm.mean_outcome(&[], &b)?;
    if (interventional - observational).abs() > IDENTITY_TOL {
        return Err(DrcfsError::IdentityViolation(format!(
            "do-path {interventional} vs conditional path {observational}"
        )));
    }
    Ok(AcdeResult { interventional, observational })
}

/// Outcome of all oracle identity checks on one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub chi: Vec<f64>,
    pub outcome_parents: Vec<usize>,
    /// Features whose chi is positive.
    pub chi_positive: Vec<usize>,
    /// Number of (feature, value pair, context) ACDE evaluations that agreed.
    pub acde_checks: usize,
    /// Features with a nonzero ACDE somewhere.
    pub acde_nonzero: Vec<usize>,
}

impl LemmaCheck {
    /// Positive chi and nonzero ACDE both pick out exactly the outcome's parents.
    pub fn parents_identified(&self) -> bool {
        self.chi_positive == self.outcome_parents && self.acde_nonzero == self.outcome_parents
    }
}

/// Runs every identity on `scm`: both chi routes and both ACDE routes over all
/// value pairs and contexts.
pub fn check_identities(scm: &DiscreteScm) -> Result<LemmaCheck> {
    scm.validate()?;
    let chi = chi_from_moments(scm)?;
    let m = scm.feature_count();
    let mut acde_checks = 0;
    let mut acde_nonzero = Vec::new();
    for j in 0..m {
        let others: Vec<usize> = (0..m).filter(|&i| i != j).collect();
        let mut nonzero = false;
        let mut ctx_idx = vec![0usize; others.len()];
        loop {
            let context: Vec<f64> = others.iter().zip(&ctx_idx).map(|(&i, &v)| scm.features[i].support[v]).collect();
            let support = &scm.features[j].support;
            for a in 0..support.len() {
                for b in (a + 1)..support.len() {
                    match exact_acde(scm, j, support[a], support[b], &context) {
                        Ok(r) => {
                            acde_checks += 1;
                            nonzero |= r.value().abs() > IDENTITY_TOL;
                        }
                        Err(DrcfsError::ZeroProbability) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
            let mut k = others.len();
            let done = loop {
                if k == 0 {
                    break true;
                }
                k -= 1;
                ctx_idx[k] += 1;
                if ctx_idx[k] < scm.features[others[k]].support.len() {
                    break false;
                }
                ctx_idx[k] = 0;
            };
            if done {
                break;
            }
        }
        if nonzero {
            acde_nonzero.push(j);
        }
    }
    let mut outcome_parents = scm.outcome.parents.clone();
    outcome_parents.sort_unstable();
    outcome_parents.dedup();
    Ok(LemmaCheck {
        chi_positive: (0..m).filter(|&j| chi[j] > IDENTITY_TOL).collect(),
        chi,
        outcome_parents,
        acde_checks,
        acde_nonzero,
    })
}

/// Whether each outcome parent changes the table somewhere with the other
/// parents held fixed.
pub fn outcome_table_nondegenerate(scm: &DiscreteScm) -> bool {
    let sizes = scm.support_sizes();
    let parents = &scm.outcome.parents;
    let radix: Vec<usize> = parents.iter().map(|&p| sizes[p]).collect();
    let rows = scm.outcome.table.len();
    (0..parents.len()).all(|k| {
        let stride: usize = radix[k + 1..].iter().product();
        (0..rows).any(|r| {
            let digit = (r / stride) % radix[k];
            (0..radix[k]).filter(|&d| d != digit).any(|d| {
                let other = r - digit * stride + d * stride;
                (scm.outcome.table[r] - scm.outcome.table[other]).abs() > 1e-9
            })
        })
    })
}

/// Random binary-feature SCM with full-support CPTs and a non-degenerate
/// outcome table.
pub fn random_binary_scm(seed: u64, features: usize) -> DiscreteScm {
    let mut rng = rng_for(seed, &[0x5C]);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let nodes: Vec<DiscreteNode> = (0..features)
            .map(|i| {
                let parents: Vec<usize> = (0..i).filter(|_| rng.random_bool(0.5)).collect();
                let cpt = (0..1usize << parents.len())
                    .map(|_| {
                        let p: f64 = rng.random_range(0.1..0.9);
                        vec![1.0 - p, p]
                    })
                    .collect();
                DiscreteNode {
                    name: format!("X{}", i + 1),
                    support: vec![0.0, 1.0],
                    parents,
                    cpt,
                }
            })
            .collect();
        let parents: Vec<usize> = (0..features).filter(|_| rng.random_bool(0.5)).collect();
        let table = (0..1usize << parents.len()).map(|_| normal.sample(&mut rng)).collect();
        let spread: f64 = rng.random_range(0.1..2.0);
        let scm = DiscreteScm {
            features: nodes,
            outcome: DiscreteOutcome {
                parents,
                table,
                noise: vec![(-spread, 0.5), (spread, 0.5)],
            },
        };
        if outcome_table_nondegenerate(&scm) {
            return scm;
        }
    }
}

/// Two binary features, iid Bernoulli(p), and `Y = f(X1, X2)` with no noise.
pub fn two_binary_features(p: f64, table: [f64; 4], parents: Vec<usize>) -> DiscreteScm {
    let node = |name: &str| DiscreteNode {
        name: name.into(),
        support: vec![0.0, 1.0],
        parents: vec![],
        cpt: vec![vec![1.0 - p, p]],
    };
    let table = match parents.as_slice() {
        [] => vec![table[0]],
        [0] => vec![table[0], table[2]],
        [1] => vec![table[0], table[1]],
        _ => table.to_vec(),
    };
    DiscreteScm {
        features: vec![node("X1"), node("X2")],
        outcome: DiscreteOutcome {
            parents,
            table,
            noise: vec![(0.0, 1.0)],
        },
    }
}

/// One dataset of a non-identifiability pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureDataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// True when X is a causal parent of Y in this model.
    pub x_causes_y: bool,
}

impl FixtureDataset {
    /// Sample covariance `[[var x, cov], [cov, var y]]` (n - 1 denominator).
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let n = self.x.len() as f64;
        let mx = self.x.iter().sum::<f64>() / n;
        let my = self.y.iter().sum::<f64>() / n;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in self.x.iter().zip(&self.y) {
            sxx += (a - mx) * (a - mx);
            sxy += (a - mx) * (b - my);
            syy += (b - my) * (b - my);
        }
        let d = n - 1.0;
        [[sxx / d, sxy / d], [sxy / d, syy / d]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexamplePair {
    pub first: FixtureDataset,
    pub second: FixtureDataset,
}

impl CounterexamplePair {
    pub fn max_covariance_gap(&self) -> f64 {
        let (a, b) = (self.first.covariance(), self.second.covariance());
        (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (a[i][j] - b[i][j]).abs())
            .fold(0.0, f64::max)
    }
}

/// How the second model of each pair draws its exogenous noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureCoupling {
    /// The second model's noise terms are a distribution-preserving transform
    /// of the first model's draws, so both datasets coincide sample by sample.
    Shared,
    /// Fresh draws for every model.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleFixtures {
    /// Correlated noise (violates exogeneity) versus a genuine cause.
    pub correlated_noise: CounterexamplePair,
    /// A genuine cause versus the outcome driving the feature.
    pub reverse_causation: CounterexamplePair,
}

/// Gaussian pairs that induce the same joint law but disagree on whether X causes Y.
pub fn counterexample_fixtures(n: usize, seed: u64, coupling: FixtureCoupling) -> CounterexampleFixtures {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let draw = |tag: u64| -> (Vec<f64>, Vec<f64>) {
        let mut rng = rng_for(seed, &[0xE1, tag]);
        (0..n).map(|_| (normal.sample(&mut rng), normal.sample(&mut rng))).unzip()
    };
    let (u, v) = draw(0);
    let (u2, v2) = match coupling {
        FixtureCoupling::Shared => (u.clone(), v.clone()),
        FixtureCoupling::Independent => draw(1),
    };

    // (N1, e1) jointly normal with all-ones covariance: both equal one draw.
    let correlated_noise = CounterexamplePair {
        first: FixtureDataset { x: u.clone(), y: u.clone(), x_causes_y: false },
        // X2 = N2, Y2 = X2 + e2 with e2 = 0
        second: FixtureDataset { x: u2.clone(), y: u2.clone(), x_causes_y: true },
    };

    // X1 = N1, Y1 = X1 + e1 with N1, e1 ~ N(0, 1)
    let first = FixtureDataset {
        x: u.clone(),
        y: u.iter().zip(&v).map(|(a, b)| a + b).collect(),
        x_causes_y: true,
    };
    // Y2 = e2 ~ N(0, 2), X2 = Y2 / 2 + N2 with N2 ~ N(0, 1/2) independent of e2.
    // Under sharing, e2 = u + v and N2 = (u - v) / 2.
    let (e2, n2): (Vec<f64>, Vec<f64>) = match coupling {
        FixtureCoupling::Shared => u2.iter().zip(&v2).map(|(a, b)| (a + b, 0.5 * (a - b))).unzip(),
        FixtureCoupling::Independent => u2
            .iter()
            .zip(&v2)
            .map(|(a, b)| (std::f64::consts::SQRT_2 * a, std::f64::consts::FRAC_1_SQRT_2 * b))
            .unzip(),
    };
    let second = FixtureDataset {
        x: e2.iter().zip(&n2).map(|(y, nz)| 0.5 * y + nz).collect(),
        y: e2,
        x_causes_y: false,
    };

    CounterexampleFixtures {
        correlated_noise,
        reverse_causation: CounterexamplePair { first, second },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn y_equals_x1() -> DiscreteScm {
        two_binary_features(0.5, [0.0, 0.0, 1.0, 1.0], vec![0])
    }

    fn xor() -> DiscreteScm {
        two_binary_features(0.5, [0.0, 1.0, 1.0, 0.0], vec![0, 1])
    }

    #[test]
    fn chi_examples() {
        let scm = y_equals_x1();
        assert_abs_diff_eq!(exact_chi(&scm, 0).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(exact_chi(&scm, 1).unwrap(), 0.0, epsilon = 1e-15);

        let independent = two_binary_features(0.5, [0.7; 4], vec![]);
        for j in 0..2 {
            assert_eq!(exact_chi(&independent, j).unwrap(), 0.0);
        }

        let x = xor();
        assert_abs_diff_eq!(exact_chi(&x, 0).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(exact_chi(&x, 1).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn moment_route_matches() {
        for scm in [y_equals_x1(), xor(), two_binary_features(0.5, [0.7; 4], vec![])] {
            let via_moments = chi_from_moments(&scm).unwrap();
            for (j, v) in via_moments.iter().enumerate() {
                assert!((v - exact_chi(&scm, j).unwrap()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn acde_examples() {
        let scm = y_equals_x1();
        for ctx in [0.0, 1.0] {
            assert_abs_diff_eq!(exact_acde(&scm, 0, 1.0, 0.0, &[ctx]).unwrap().value(), 1.0);
            assert_abs_diff_eq!(exact_acde(&scm, 1, 1.0, 0.0, &[ctx]).unwrap().value(), 0.0);
        }
        let r = exact_acde(&xor(), 0, 1.0, 0.0, &[1.0]).unwrap();
        assert_abs_diff_eq!(r.value(), -1.0);
        assert_abs_diff_eq!(r.observational, -1.0);
    }

    #[test]
    fn acde_rejects_values_outside_support() {
        assert!(exact_acde(&xor(), 0, 2.0, 0.0, &[1.0]).is_err());
        assert!(exact_acde(&xor(), 0, 1.0, 0.0, &[]).is_err());
    }

    #[test]
    fn zero_probability_context() {
        // X2 is a copy of X1, so (X1 = 1, X2 = 0) never happens
        let mut scm = xor();
        scm.features[1].parents = vec![0];
        scm.features[1].cpt = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        scm.validate().unwrap();
        assert!(matches!(exact_acde(&scm, 0, 1.0, 0.0, &[0.0]), Err(DrcfsError::ZeroProbability)));
        // interventions are still defined
        assert_abs_diff_eq!(scm.mean_outcome(&[Some(1), Some(0)], &[]).unwrap(), 1.0);
    }

    #[test]
    fn enumeration_cap() {
        let node = DiscreteNode {
            name: "big".into(),
            support: (0..1000).map(f64::from).collect(),
            parents: vec![],
            cpt: vec![vec![1e-3; 1000]],
        };
        let mut scm = xor();
        scm.features = vec![node.clone(), node.clone(), node];
        scm.features.iter_mut().for_each(|n| n.cpt[0][0] += 1.0 - n.cpt[0].iter().sum::<f64>());
        scm.outcome = DiscreteOutcome { parents: vec![], table: vec![0.0], noise: vec![(0.0, 1.0)] };
        assert!(matches!(exact_chi(&scm, 0), Err(DrcfsError::SupportTooLarge { .. })));
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mut scm = xor();
        scm.features[0].cpt[0] = vec![0.5, 0.6];
        assert!(scm.validate().is_err());
        let mut scm = xor();
        scm.features[0].parents = vec![1];
        assert!(scm.validate().is_err());
        let mut scm = xor();
        scm.outcome.table.pop();
        assert!(scm.validate().is_err());
    }

    #[test]
    fn json_fixture_round_trip() {
        let json = serde_json::to_string(&xor()).unwrap();
        let back = DiscreteScm::from_json(&json).unwrap();
        assert_eq!(back, xor());
        assert!(DiscreteScm::from_json(r#"{"features": []}"#).is_err());
    }

    #[test]
    fn random_models_satisfy_identities() {
        for seed in 0..20 {
            let scm = random_binary_scm(seed, 3);
            let check = check_identities(&scm).unwrap();
            assert!(check.parents_identified(), "seed {seed}: {check:?}");
        }
    }

    #[test]
    fn degenerate_table_detection() {
        // Y depends on X1 only through a table that ignores it
        let scm = two_binary_features(0.5, [1.0, 2.0, 1.0, 2.0], vec![0, 1]);
        assert!(!outcome_table_nondegenerate(&scm));
        assert!(outcome_table_nondegenerate(&xor()));
    }

    #[test]
    fn fixture_covariances() {
        let n = 100_000;
        let f = counterexample_fixtures(n, 11, FixtureCoupling::Shared);
        let bound = 4.0 / (n as f64).sqrt();
        for pair in [&f.correlated_noise, &f.reverse_causation] {
            assert!(pair.max_covariance_gap() <= bound);
            assert_ne!(pair.first.x_causes_y, pair.second.x_causes_y);
        }
        let c = f.correlated_noise.first.covariance();
        for v in c.iter().flatten() {
            assert!((v - 1.0).abs() < 0.02);
        }
        let c = f.reverse_causation.second.covariance();
        assert!((c[0][0] - 1.0).abs() < 0.02 && (c[0][1] - 1.0).abs() < 0.02 && (c[1][1] - 2.0).abs() < 0.04);

        let g = counterexample_fixtures(n, 11, FixtureCoupling::Independent);
        let c1 = g.reverse_causation.first.covariance();
        let c2 = g.reverse_causation.second.covariance();
        for (a, b) in [(c1, [[1.0, 1.0], [1.0, 2.0]]), (c2, [[1.0, 1.0], [1.0, 2.0]])] {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[i][j] - b[i][j]).abs() < 0.04, "{a:?}");
                }
            }
        }
        // independent draws differ at the sampling-noise scale only
        assert!(g.reverse_causation.max_covariance_gap() < 20.0 / (n as f64).sqrt());
        assert_eq!(counterexample_fixtures(50, 3, FixtureCoupling::Independent), counterexample_fixtures(50, 3, FixtureCoupling::Independent));
    }
}
