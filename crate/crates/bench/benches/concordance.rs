use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kernet_bench::{predicted_curves, synthetic_dataset};
use kernet_core::{bootstrap_ci, ctd_index, ctd_subsampled, fit, FitConfig};

fn bench_concordance(c: &mut Criterion) {
    let train = synthetic_dataset(10, 5_000, 3, 4.0, 60);
    let model = fit(&train, &FitConfig::default()).unwrap();

    let mut group = c.benchmark_group("ctd");
    group.sample_size(10);
    for n in [1_000usize, 4_000] {
        let test = synthetic_dataset(11, n, 3, 4.0, 60);
        let curves = predicted_curves(&model, &test);
        group.bench_with_input(BenchmarkId::new("exact", n), &n, |b, _| {
            b.iter(|| ctd_index(black_box(&curves), &test).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("subsampled_1024", n), &n, |b, _| {
            b.iter(|| ctd_subsampled(black_box(&curves), &test, 1024, 0).unwrap())
        });
    }
    let test = synthetic_dataset(12, 1_000, 3, 4.0, 60);
    let curves = predicted_curves(&model, &test);
    group.bench_function("bootstrap_50_n1000", |b| {
        b.iter(|| bootstrap_ci(black_box(&curves), &test, 50, 0.95, 0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_concordance);
criterion_main!(benches);
