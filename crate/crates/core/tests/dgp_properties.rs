use drcfs_core::dgp::{sample_graph, simulate_dataset, simulate_from_graph, CausalGraph, DgpConfig, MixtureComponent, Transform};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

fn column(x: &DMatrix<f64>, c: usize) -> Vec<f64> {
    x.column(c).iter().copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graphs_are_acyclic_with_sink_outcome(m in 1usize..30, p_c in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = sample_graph(&DgpConfig::linear(m, 1, p_c, seed)).unwrap();
        prop_assert!(g.is_acyclic());
        prop_assert!(g.respects_order());
        prop_assert_eq!(g.out_degree(g.outcome_index), 0);
        prop_assert_eq!(*g.topological_order.last().unwrap(), g.outcome_index);
    }

    #[test]
    fn hiding_is_monotone_in_p_h(seed in any::<u64>(), lo in 0.0f64..1.0, gap in 0.0f64..1.0) {
        let hi = (lo + gap).min(1.0);
        let cfg = |p_h| DgpConfig { p_h, ..DgpConfig::linear(15, 1, 0.3, seed) };
        let a = sample_graph(&cfg(lo)).unwrap();
        let b = sample_graph(&cfg(hi)).unwrap();
        prop_assert_eq!(&a.edges, &b.edges);
        for i in 0..15 {
            prop_assert!(!a.hidden[i] || b.hidden[i], "node {} hidden at {} but not at {}", i, lo, hi);
        }
    }
}

#[test]
fn outcome_noise_is_exogenous() {
    let n = 10_000;
    let bound = 3.0 / (n as f64).sqrt();
    for (seed, p_c) in [(1u64, 0.2), (2, 0.5), (3, 0.9)] {
        let sim = simulate_dataset(&DgpConfig::linear(8, n, p_c, seed)).unwrap();
        for c in 0..sim.data.n_features() {
            let r = corr(&sim.outcome_noise, &column(&sim.data.features, c));
            assert!(r.abs() < bound, "seed {seed}, column {c}: corr {r}");
        }
    }
}

#[test]
fn identical_configs_give_identical_data() {
    let cfg = DgpConfig {
        p_h: 0.2,
        transform_mixture: Transform::ALL.iter().map(|&f| MixtureComponent::new(f, 1.0 / 7.0)).collect(),
        ..DgpConfig::linear(12, 300, 0.4, 99)
    };
    let a = simulate_dataset(&cfg).unwrap();
    let b = simulate_dataset(&cfg).unwrap();
    assert_eq!(a, b);
    let c = simulate_dataset(&DgpConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a.data, c.data);
}

#[test]
fn no_edges_means_uncorrelated_outcome() {
    let n = 50_000;
    let sim = simulate_dataset(&DgpConfig::linear(5, n, 0.0, 4)).unwrap();
    for c in 0..5 {
        assert!(corr(&sim.data.outcome, &column(&sim.data.features, c)).abs() < 4.0 / (n as f64).sqrt());
    }
    assert!(sim.observed_parent_mask.iter().all(|&p| !p));
}

#[test]
fn least_squares_recovers_linear_coefficients() {
    let linear = (Transform::Linear, Transform::Linear.default_params());
    let graph = CausalGraph {
        node_count: 3,
        edges: vec![(0, 2)],
        topological_order: vec![0, 1, 2],
        outcome_index: 2,
        hidden: vec![false, false],
        transforms: vec![linear; 3],
    };
    let sim = simulate_from_graph(&DgpConfig::linear(2, 100_000, 0.0, 8), graph).unwrap();
    assert_eq!(sim.observed_parent_mask, [true, false]);

    // ordinary least squares with an intercept, solved by SVD
    let x = &sim.data.features;
    let design = DMatrix::from_fn(x.nrows(), 3, |r, c| if c == 0 { 1.0 } else { x[(r, c - 1)] });
    let y = DVector::from_vec(sim.data.outcome.clone());
    let beta = design.svd(true, true).solve(&y, 1e-12).unwrap();
    assert!((beta[1] - 0.5).abs() < 0.02, "{beta}");
    assert!(beta[2].abs() < 0.02, "{beta}");
}

#[test]
fn full_hiding_removes_only_non_parents() {
    for seed in 0..10 {
        let cfg = DgpConfig { p_h: 1.0, ..DgpConfig::linear(10, 5, 0.4, seed) };
        let sim = simulate_dataset(&cfg).unwrap();
        let parents = sim.graph.outcome_parents();
        assert_eq!(sim.column_nodes, parents);
        assert!(sim.observed_parent_mask.iter().all(|&p| p));
    }
}
