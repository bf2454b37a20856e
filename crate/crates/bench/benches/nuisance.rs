use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use drcfs_core::dgp::{simulate_dataset, DgpConfig};
use drcfs_core::nuisance::{fit_forest, fit_linear, ForestSpec, LinearSpec, LinearTarget};

fn linear(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_linear");
    for &n in &[1_000usize, 5_000] {
        let sim = simulate_dataset(&DgpConfig::linear(20, n, 0.3, 1)).unwrap();
        let data = sim.data;
        let columns: Vec<usize> = (0..data.n_features()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                fit_linear(
                    black_box(&data.features),
                    &data.outcome,
                    LinearTarget::Mean,
                    &LinearSpec::default(),
                    &columns,
                    0,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn forest(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_forest");
    group.sample_size(10);
    let sim = simulate_dataset(&DgpConfig::linear(10, 2_000, 0.3, 1)).unwrap();
    let data = sim.data;
    let columns: Vec<usize> = (0..data.n_features()).collect();
    for &trees in &[20usize, 100] {
        let spec = ForestSpec { trees, ..ForestSpec::default() };
        group.bench_with_input(BenchmarkId::from_parameter(trees), &trees, |b, _| {
            b.iter(|| fit_forest(black_box(&data.features), &data.outcome, LinearTarget::Mean, &spec, &columns, 0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, linear, forest);
criterion_main!(benches);
