use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kernet_bench::{synthetic_dataset, synthetic_queries};
use kernet_core::{direct_hazard, fit, predict, FitConfig, GraphParams, IndexBackend};

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for n in [2_000usize, 10_000] {
        let ds = synthetic_dataset(1, n, 4, 4.0, 100);
        group.bench_with_input(BenchmarkId::from_parameter(n), &ds, |b, ds| {
            b.iter(|| fit(black_box(ds), &FitConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_predict(c: &mut Criterion) {
    let ds = synthetic_dataset(2, 20_000, 4, 4.0, 100);
    let queries = synthetic_queries(3, 64, 4, 4.0);
    let exact = fit(&ds, &FitConfig::default()).unwrap();
    let graph = fit(
        &ds,
        &FitConfig {
            index: IndexBackend::Graph(GraphParams::with_seed(0)),
            ..FitConfig::default()
        },
    )
    .unwrap();

    let mut group = c.benchmark_group("predict_64_queries");
    group.bench_function("kernet_exact", |b| {
        b.iter(|| {
            for q in &queries {
                black_box(predict(&exact, q).unwrap());
            }
        })
    });
    group.bench_function("kernet_graph", |b| {
        b.iter(|| {
            for q in &queries {
                black_box(predict(&graph, q).unwrap());
            }
        })
    });
    group.sample_size(10);
    group.bench_function("direct_summation", |b| {
        b.iter(|| {
            for q in &queries {
                black_box(direct_hazard(&ds, exact.kernel(), q, exact.grid()).unwrap());
            }
        })
    });
    group.finish();
}

criterion_group!(benches, bench_fit, bench_predict);
criterion_main!(benches);
