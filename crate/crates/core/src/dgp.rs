//! Random causal structures and observational samples drawn from them.
//!
//! Nodes `0..m` are features and node `m` is the outcome. The outcome is always
//! placed last in the topological order, so it has no children. Each node gets
//! a transformation family drawn from the configured mixture and receives
//! independent additive noise. After sampling, feature nodes may be hidden;
//! hidden values still feed their children but are dropped from the observed
//! matrix.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{DrcfsError, Result};
use crate::rng::rng_for;

const STREAM_ORDER: u64 = 0;
const STREAM_EDGES: u64 = 1;
const STREAM_TRANSFORMS: u64 = 2;
const STREAM_HIDING: u64 = 3;
const STREAM_NOISE: u64 = 4;

/// The seven transformation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[serde(alias = "f1")]
    Linear,
    #[serde(alias = "f2")]
    SumSqrt,
    #[serde(alias = "f3")]
    SumSine,
    #[serde(alias = "f4")]
    SumTanh,
    #[serde(alias = "f5")]
    GeometricMean,
    #[serde(alias = "f6")]
    LogSumExp,
    #[serde(alias = "f7")]
    SqrtSum,
}

impl Transform {
    pub const ALL: [Transform; 7] = [
        Transform::Linear,
        Transform::SumSqrt,
        Transform::SumSine,
        Transform::SumTanh,
        Transform::GeometricMean,
        Transform::LogSumExp,
        Transform::SqrtSum,
    ];

    /// Default `(a, b, c)` constants for the family.
    pub fn default_params(self) -> TransformParams {
        let (a, b, c) = match self {
            Transform::Linear => (0.5, 0.0, 0.0),
            Transform::SumSqrt => (0.5, 0.0, 0.0),
            Transform::SumSine => (1.0, 0.0, 0.5),
            Transform::SumTanh => (1.0, 0.0, 2.0),
            Transform::GeometricMean => (3.0, 0.1, 0.0),
            Transform::LogSumExp => (1.0, std::f64::consts::LN_2, 0.0),
            Transform::SqrtSum => (1.0, 0.0, 0.0),
        };
        TransformParams { a, b, c }
    }

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Evaluates `family` at the given parent values. An empty parent set yields `b`.
pub fn eval_transform(family: Transform, params: TransformParams, parents: &[f64]) -> f64 {
    let TransformParams { a, b, c } = params;
    if parents.is_empty() {
        return b;
    }
    match family {
        Transform::Linear => a * parents.iter().sum::<f64>() + b,
        Transform::SumSqrt => a * parents.iter().map(|x| x.abs().sqrt()).sum::<f64>() + b,
        Transform::SumSine => a * parents.iter().map(|x| (c * x).sin()).sum::<f64>() + b,
        Transform::SumTanh => a * parents.iter().map(|x| (c * x).tanh()).sum::<f64>() + b,
        Transform::GeometricMean => {
            // log-domain product avoids overflow for many parents
            let card = parents.len() as f64;
            let log_mean = parents.iter().map(|x| x.abs().ln()).sum::<f64>() / card;
            a * log_mean.exp() + b
        }
        Transform::LogSumExp => {
            let max = parents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + parents.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            a * lse + b
        }
        Transform::SqrtSum => a * parents.iter().sum::<f64>().abs().sqrt() + b,
    }
}

/// One component of the transformation mixture. Missing constants fall back to
/// the family defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub family: Transform,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl MixtureComponent {
    pub fn new(family: Transform, weight: f64) -> Self {
        Self {
            family,
            weight,
            a: None,
            b: None,
            c: None,
        }
    }

    pub fn params(&self) -> TransformParams {
        let d = self.family.default_params();
        TransformParams {
            a: self.a.unwrap_or(d.a),
            b: self.b.unwrap_or(d.b),
            c: self.c.unwrap_or(d.c),
        }
    }
}

/// Additive noise distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    StandardNormal,
    Normal { mean: f64, std: f64 },
    Beta { alpha: f64, beta: f64 },
    LocationScale { base: Box<NoiseSpec>, loc: f64, scale: f64 },
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::StandardNormal
    }
}

enum NoiseSampler {
    Normal(Normal<f64>),
    Beta(Beta<f64>),
    Affine(Box<NoiseSampler>, f64, f64),
}

impl NoiseSampler {
    fn new(spec: &NoiseSpec) -> Result<Self> {
        let bad = |e: &dyn std::fmt::Display| DrcfsError::InvalidConfig(format!("noise: {e}"));
        Ok(match spec {
            NoiseSpec::StandardNormal => NoiseSampler::Normal(Normal::new(0.0, 1.0).map_err(|e| bad(&e))?),
            NoiseSpec::Normal { mean, std } => {
                NoiseSampler::Normal(Normal::new(*mean, *std).map_err(|e| bad(&e))?)
            }
            NoiseSpec::Beta { alpha, beta } => {
                NoiseSampler::Beta(Beta::new(*alpha, *beta).map_err(|e| bad(&e))?)
            }
            NoiseSpec::LocationScale { base, loc, scale } => {
                if !(scale.is_finite() && loc.is_finite()) {
                    return Err(DrcfsError::InvalidConfig("noise: non-finite loc/scale".into()));
                }
                NoiseSampler::Affine(Box::new(NoiseSampler::new(base)?), *loc, *scale)
            }
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            NoiseSampler::Normal(d) => d.sample(rng),
            NoiseSampler::Beta(d) => d.sample(rng),
            NoiseSampler::Affine(inner, loc, scale) => loc + scale * inner.sample(rng),
        }
    }
}

fn default_mixture() -> Vec<MixtureComponent> {
    vec![MixtureComponent::new(Transform::Linear, 1.0)]
}

/// Parameters of the data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    /// Number of feature nodes.
    pub m: usize,
    /// Number of observations.
    pub n: usize,
    /// Edge probability for each ordered pair.
    pub p_c: f64,
    /// Probability of hiding each feature node.
    #[serde(default)]
    pub p_h: f64,
    #[serde(default = "default_mixture")]
    pub transform_mixture: Vec<MixtureComponent>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
    /// When false, parents of the outcome are never hidden.
    #[serde(default)]
    pub allow_hidden_parents: bool,
}

impl DgpConfig {
    /// Linear-only mixture with standard normal noise.
    pub fn linear(m: usize, n: usize, p_c: f64, seed: u64) -> Self {
        Self {
            m,
            n,
            p_c,
            p_h: 0.0,
            transform_mixture: default_mixture(),
            noise: NoiseSpec::StandardNormal,
            seed,
            allow_hidden_parents: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |s: String| Err(DrcfsError::InvalidConfig(s));
        if self.m < 1 {
            return err("m must be at least 1".into());
        }
        if self.n < 1 {
            return err("n must be at least 1".into());
        }
        for (name, p) in [("p_c", self.p_c), ("p_h", self.p_h)] {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("{name} = {p} is not a probability"));
            }
        }
        if self.transform_mixture.is_empty() {
            return err("transform mixture is empty".into());
        }
        if self.transform_mixture.iter().any(|c| !(c.weight >= 0.0) || !c.weight.is_finite()) {
            return err("mixture weights must be finite and nonnegative".into());
        }
        let total: f64 = self.transform_mixture.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return err(format!("mixture weights sum to {total}, expected 1"));
        }
        NoiseSampler::new(&self.noise)?;
        Ok(())
    }
}

/// A DAG over `m` feature nodes plus the outcome node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalGraph {
    pub node_count: usize,
    /// `(parent, child)` pairs.
    pub edges: Vec<(usize, usize)>,
    pub topological_order: Vec<usize>,
    pub outcome_index: usize,
    /// One mark per feature node.
    pub hidden: Vec<bool>,
    pub transforms: Vec<(Transform, TransformParams)>,
}

impl CausalGraph {
    pub fn feature_count(&self) -> usize {
        self.node_count - 1
    }

    pub fn parents_of(&self, node: usize) -> Vec<usize> {
        let mut p: Vec<usize> = self
            .edges
            .iter()
            .filter(|&&(_, c)| c == node)
            .map(|&(p, _)| p)
            .collect();
        p.sort_unstable();
        p
    }

    pub fn outcome_parents(&self) -> Vec<usize> {
        self.parents_of(self.outcome_index)
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|&&(p, _)| p == node).count()
    }

    /// Feature node ids that remain observed, in increasing order.
    pub fn observed_nodes(&self) -> Vec<usize> {
        (0..self.feature_count()).filter(|&i| !self.hidden[i]).collect()
    }

    /// Kahn's algorithm over the edge list.
    pub fn is_acyclic(&self) -> bool {
        let mut indeg = vec![0usize; self.node_count];
        for &(_, c) in &self.edges {
            indeg[c] += 1;
        }
        let mut stack: Vec<usize> = (0..self.node_count).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for &(p, c) in &self.edges {
                if p == v {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        stack.push(c);
                    }
                }
            }
        }
        seen == self.node_count
    }

    /// True when every edge points forward in `topological_order`.
    pub fn respects_order(&self) -> bool {
        let mut pos = vec![0usize; self.node_count];
        for (i, &v) in self.topological_order.iter().enumerate() {
            pos[v] = i;
        }
        self.edges.iter().all(|&(p, c)| pos[p] < pos[c])
    }
}

fn pick_component<'a>(mixture: &'a [MixtureComponent], rng: &mut ChaCha8Rng) -> &'a MixtureComponent {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for comp in mixture {
        acc += comp.weight;
        if u < acc {
            return comp;
        }
    }
    // rounding slack at the top of the unit interval
    mixture.iter().rev().find(|c| c.weight > 0.0).unwrap_or(&mixture[0])
}

/// Samples a random DAG with the outcome forced last in the order.
pub fn sample_graph(config: &DgpConfig) -> Result<CausalGraph> {
    config.validate()?;
    let m = config.m;
    let outcome = m;

    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng_for(config.seed, &[STREAM_ORDER]));
    order.push(outcome);

    let mut edge_rng = rng_for(config.seed, &[STREAM_EDGES]);
    let mut edges = Vec::new();
    for i in 0..order.len() {
        for j in (i + 1)..order.len() {
            if edge_rng.random_bool(config.p_c) {
                edges.push((order[i], order[j]));
            }
        }
    }

    let mut transform_rng = rng_for(config.seed, &[STREAM_TRANSFORMS]);
    let transforms = (0..=m)
        .map(|_| {
            let comp = pick_component(&config.transform_mixture, &mut transform_rng);
            (comp.family, comp.params())
        })
        .collect();

    let mut graph = CausalGraph {
        node_count: m + 1,
        edges,
        topological_order: order,
        outcome_index: outcome,
        hidden: vec![false; m],
        transforms,
    };
    graph.hidden = hiding_marks(&graph, config);
    Ok(graph)
}

/// One uniform per feature from a dedicated stream, so hiding at different
/// `p_h` values is coupled under a shared seed.
fn hiding_marks(graph: &CausalGraph, config: &DgpConfig) -> Vec<bool> {
    let mut rng = rng_for(config.seed, &[STREAM_HIDING]);
    let parents = graph.outcome_parents();
    (0..config.m)
        .map(|i| {
            let u: f64 = rng.random();
            let exempt = !config.allow_hidden_parents && parents.binary_search(&i).is_ok();
            u < config.p_h && !exempt
        })
        .collect()
}

/// Observed data together with its generating structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDataset {
    pub data: Dataset,
    /// Ground truth: observed column `i` is a parent of the outcome.
    pub observed_parent_mask: Vec<bool>,
    pub graph: CausalGraph,
    /// Original node id of each observed column.
    pub column_nodes: Vec<usize>,
    /// Outcome noise draws, kept for exogeneity diagnostics.
    pub outcome_noise: Vec<f64>,
}

/// Mask over the given observed node ids: true iff the node has an edge into the outcome.
pub fn ground_truth_parents(graph: &CausalGraph, observed_nodes: &[usize]) -> Vec<bool> {
    let parents = graph.outcome_parents();
    observed_nodes
        .iter()
        .map(|v| parents.binary_search(v).is_ok())
        .collect()
}

/// Samples a graph and then `n` rows in topological order.
pub fn simulate_dataset(config: &DgpConfig) -> Result<SimulatedDataset> {
    let graph = sample_graph(config)?;
    simulate_from_graph(config, graph)
}

/// Samples `n` rows from an existing graph. Noise is drawn from the config seed,
/// so two calls with different seeds over the same graph give fresh data.
pub fn simulate_from_graph(config: &DgpConfig, graph: CausalGraph) -> Result<SimulatedDataset> {
    config.validate()?;
    if graph.feature_count() != config.m {
        return Err(DrcfsError::DimensionMismatch {
            expected: config.m,
            got: graph.feature_count(),
        });
    }
    let n = config.n;
    let sampler = NoiseSampler::new(&config.noise)?;
    let mut noise_rng = rng_for(config.seed, &[STREAM_NOISE]);

    let parent_lists: Vec<Vec<usize>> = (0..graph.node_count).map(|v| graph.parents_of(v)).collect();
    let mut values = vec![vec![0.0; n]; graph.node_count];
    let mut outcome_noise = Vec::new();
    let mut buf = Vec::new();

    for &node in &graph.topological_order {
        let (family, params) = graph.transforms[node];
        let mut column = vec![0.0; n];
        for (row, slot) in column.iter_mut().enumerate() {
            buf.clear();
            buf.extend(parent_lists[node].iter().map(|&p| values[p][row]));
            let eps = sampler.sample(&mut noise_rng);
            let v = eval_transform(family, params, &buf) + eps;
            if !v.is_finite() {
                return Err(DrcfsError::NonFinite {
                    node: node_name(&graph, node),
                    row,
                });
            }
            if node == graph.outcome_index {
                outcome_noise.push(eps);
            }
            *slot = v;
        }
        values[node] = column;
    }

    let column_nodes = graph.observed_nodes();
    let features = DMatrix::from_fn(n, column_nodes.len(), |r, c| values[column_nodes[c]][r]);
    let outcome = std::mem::take(&mut values[graph.outcome_index]);
    let data = Dataset::with_default_names(features, outcome)?;
    let observed_parent_mask = ground_truth_parents(&graph, &column_nodes);

    Ok(SimulatedDataset {
        data,
        observed_parent_mask,
        graph,
        column_nodes,
        outcome_noise,
    })
}

/// Name of a graph node: `Y` for the outcome, `V<id+1>` for features (the
/// original numbering, distinct from observed column names).
pub fn node_name(graph: &CausalGraph, node: usize) -> String {
    if node == graph.outcome_index {
        "Y".to_string()
    } else {
        format!("V{}", node + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub column: String,
    pub node: String,
}

/// Ground-truth export document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub parents: Vec<String>,
    pub graph: Vec<(String, String)>,
    pub hidden: Vec<usize>,
    pub columns: Vec<ColumnMapping>,
    pub config: DgpConfig,
}

impl SimulatedDataset {
    pub fn ground_truth(&self, config: &DgpConfig) -> GroundTruth {
        let g = &self.graph;
        GroundTruth {
            parents: self
                .data
                .column_names
                .iter()
                .zip(&self.observed_parent_mask)
                .filter(|(_, &p)| p)
                .map(|(name, _)| name.clone())
                .collect(),
            graph: g
                .edges
                .iter()
                .map(|&(p, c)| (node_name(g, p), node_name(g, c)))
                .collect(),
            hidden: (0..g.feature_count()).filter(|&i| g.hidden[i]).collect(),
            columns: self
                .data
                .column_names
                .iter()
                .zip(&self.column_nodes)
                .map(|(col, &node)| ColumnMapping {
                    column: col.clone(),
                    node: node_name(g, node),
                })
                .collect(),
            config: config.clone(),
        }
    }
}
