use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use trackrec_bench::planted_matrix;
use trackrec_core::clustering::{kmeans_fit, kmeans_predict, FitConfig, Variant};

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("kmeans_fit");
    group.sample_size(10);
    for &(n, d, k) in &[(2_000usize, 16usize, 8usize), (10_000, 16, 8), (10_000, 54, 20)] {
        let matrix = planted_matrix(n, d, k, 7);
        group.bench_with_input(
            BenchmarkId::new("lloyd", format!("n{n}_d{d}_k{k}")),
            &matrix,
            |b, m| {
                b.iter(|| kmeans_fit(black_box(m), &FitConfig::with_k(k)).unwrap());
            },
        );
        let mb = FitConfig {
            variant: Variant::MiniBatch,
            batch_size: 1024,
            ..FitConfig::with_k(k)
        };
        group.bench_with_input(
            BenchmarkId::new("minibatch", format!("n{n}_d{d}_k{k}")),
            &matrix,
            |b, m| {
                b.iter(|| kmeans_fit(black_box(m), &mb).unwrap());
            },
        );
    }
    group.finish();
}

fn bench_predict(c: &mut Criterion) {
    let matrix = planted_matrix(50_000, 54, 20, 11);
    let model = kmeans_fit(&matrix, &FitConfig::with_k(20)).unwrap();
    c.bench_function("kmeans_predict/n50000_d54_k20", |b| {
        b.iter(|| kmeans_predict(black_box(&model), black_box(&matrix)).unwrap());
    });
}

criterion_group!(benches, bench_fit, bench_predict);
criterion_main!(benches);
