use drcfs_core::dgp::{simulate_from_graph, CausalGraph, DgpConfig, Transform};
use drcfs_core::nuisance::{fit_linear, LinearSpec, LinearTarget, Moment, Predictor};
use drcfs_core::LearnerSpec;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix(n: usize, d: usize) -> impl Strategy<Value = (DMatrix<f64>, Vec<f64>)> {
    (
        proptest::collection::vec(-5.0f64..5.0, n * d),
        proptest::collection::vec(-5.0f64..5.0, n),
    )
        .prop_map(move |(xs, y)| (DMatrix::from_vec(n, d, xs), y))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normal_equations_hold((x, y) in matrix(40, 3), lambda in 1e-3f64..10.0) {
        let model = fit_linear(&x, &y, LinearTarget::Mean, &LinearSpec::fixed(lambda), &[0, 1, 2], 0).unwrap();
        let z = model.standardized_design(&x).unwrap();
        let n = x.nrows() as f64;
        let ybar = y.iter().sum::<f64>() / n;
        let centered = DVector::from_iterator(y.len(), y.iter().map(|v| v - ybar));
        let beta = DVector::from_vec(model.coefficients.clone());
        let lhs = z.tr_mul(&z) / n * &beta + &beta * lambda;
        let rhs = z.tr_mul(&centered) / n;
        prop_assert!((lhs - rhs).amax() <= 1e-8);
    }

    #[test]
    fn riesz_and_mean_coincide((x, y) in matrix(30, 2), lambda in 1e-3f64..10.0) {
        let spec = LinearSpec::fixed(lambda);
        let g = fit_linear(&x, &y, LinearTarget::Mean, &spec, &[0, 1], 0).unwrap();
        let a = fit_linear(&x, &y, LinearTarget::Riesz(Moment::OutcomeProduct), &spec, &[0, 1], 0).unwrap();
        prop_assert!((g.intercept - a.intercept).abs() <= 1e-10);
        for (u, v) in g.coefficients.iter().zip(&a.coefficients) {
            prop_assert!((u - v).abs() <= 1e-10);
        }
    }

    #[test]
    fn ridge_shrinks_coefficients((x, y) in matrix(30, 3), l1 in 1e-3f64..5.0, factor in 1.0f64..100.0) {
        let fit = |l| fit_linear(&x, &y, LinearTarget::Mean, &LinearSpec::fixed(l), &[0, 1, 2], 0).unwrap().coefficients;
        prop_assert!(norm(&fit(l1 * factor)) <= norm(&fit(l1)) + 1e-12);
    }

    #[test]
    fn exact_fit_reproduces_training_rows(
        coefs in proptest::collection::vec(-3.0f64..3.0, 2),
        intercept in -3.0f64..3.0,
        (x, _) in matrix(20, 2),
    ) {
        let y: Vec<f64> = (0..20).map(|r| intercept + coefs[0] * x[(r, 0)] + coefs[1] * x[(r, 1)]).collect();
        let model = fit_linear(&x, &y, LinearTarget::Mean, &LinearSpec::fixed(0.0), &[0, 1], 0).unwrap();
        for r in 0..20 {
            prop_assert!((model.predict_row(&[x[(r, 0)], x[(r, 1)]]).unwrap() - y[r]).abs() <= 1e-8);
        }
    }
}

#[test]
fn permuted_columns_give_the_same_predictions() {
    let x = DMatrix::from_fn(50, 3, |r, c| ((r * 7 + c * 13) % 17) as f64 - 8.0);
    let y: Vec<f64> = (0..50).map(|r| x[(r, 0)] - 2.0 * x[(r, 2)] + (r % 3) as f64).collect();
    let spec = LinearSpec::fixed(0.1);
    let a = fit_linear(&x, &y, LinearTarget::Mean, &spec, &[0, 1, 2], 0).unwrap();
    let order = [2, 0, 1];
    let xp = DMatrix::from_fn(50, 3, |r, c| x[(r, order[c])]);
    let b = fit_linear(&xp, &y, LinearTarget::Mean, &spec, &order, 0).unwrap();
    for r in 0..50 {
        let row: Vec<f64> = (0..3).map(|c| x[(r, c)]).collect();
        let prow: Vec<f64> = order.iter().map(|&c| x[(r, c)]).collect();
        assert!((a.predict_row(&row).unwrap() - b.predict_row(&prow).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn independent_outcome_gives_small_riesz_slope() {
    let n = 20_000;
    let x = DMatrix::from_fn(n, 1, |r, _| if r % 2 == 0 { 1.0 } else { -1.0 });
    // outcome uncorrelated with the alternating sign
    let y: Vec<f64> = (0..n).map(|r| ((r / 2) % 5) as f64).collect();
    let a = fit_linear(&x, &y, LinearTarget::Riesz(Moment::OutcomeProduct), &LinearSpec::fixed(0.0), &[0], 0).unwrap();
    assert!(a.coefficients[0].abs() < 1e-10);
}

#[test]
fn linear_fit_error_shrinks_with_n() {
    // Y = 0.5 (X1 + X2) + e, X3 irrelevant
    let linear = (Transform::Linear, Transform::Linear.default_params());
    let graph = CausalGraph {
        node_count: 4,
        edges: vec![(0, 3), (1, 3)],
        topological_order: vec![0, 1, 2, 3],
        outcome_index: 3,
        hidden: vec![false; 3],
        transforms: vec![linear; 4],
    };
    let test = simulate_from_graph(&DgpConfig::linear(3, 5000, 0.0, 1), graph.clone()).unwrap().data;
    let truth: Vec<f64> = (0..test.n_rows()).map(|r| 0.5 * (test.features[(r, 0)] + test.features[(r, 1)])).collect();

    let mut errors = Vec::new();
    for (i, n) in [500usize, 2000, 8000].into_iter().enumerate() {
        let train = simulate_from_graph(&DgpConfig::linear(3, n, 0.0, 10 + i as u64), graph.clone()).unwrap().data;
        let model = LearnerSpec::default().fit_mean(&train.features, &train.outcome, &[0, 1, 2], 0).unwrap();
        let pred = model.predict_matrix(&test.features).unwrap();
        let mse = pred.iter().zip(&truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / truth.len() as f64;
        errors.push(mse);
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}
