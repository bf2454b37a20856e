use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use drcfs_core::dgp::{simulate_dataset, DgpConfig};
use drcfs_core::{run_drcfs, DrcfsConfig};

fn run(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_drcfs");
    group.sample_size(10);
    for &m in &[10usize, 20, 40] {
        let sim = simulate_dataset(&DgpConfig::linear(m, 2_000, 0.3, 7)).unwrap();
        group.bench_with_input(BenchmarkId::new("linear_m", m), &sim.data, |b, data| {
            b.iter(|| run_drcfs(data, &DrcfsConfig::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, run);
criterion_main!(benches);
