use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use trackrec_bench::planted_matrix;
use trackrec_core::clustering::{kmeans_fit, kmeans_predict, FitConfig};
use trackrec_core::evaluation::silhouette_score;

fn bench_silhouette(c: &mut Criterion) {
    let mut group = c.benchmark_group("silhouette");
    group.sample_size(10);
    let matrix = planted_matrix(10_000, 16, 5, 3);
    let model = kmeans_fit(&matrix, &FitConfig::with_k(5)).unwrap();
    let assignments = kmeans_predict(&model, &matrix).unwrap();
    for &sample in &[500usize, 2_000] {
        group.bench_with_input(
            BenchmarkId::new("sampled", sample),
            &sample,
            |b, &sample| {
                b.iter(|| {
                    silhouette_score(
                        black_box(&matrix),
                        black_box(&assignments),
                        Some(sample),
                        9,
                    )
                    .unwrap()
                });
            },
        );
    }
    let small = planted_matrix(2_000, 16, 5, 4);
    let small_model = kmeans_fit(&small, &FitConfig::with_k(5)).unwrap();
    let small_assignments = kmeans_predict(&small_model, &small).unwrap();
    group.bench_function("full/n2000", |b| {
        b.iter(|| {
            silhouette_score(black_box(&small), black_box(&small_assignments), None, 0).unwrap()
        });
    });
    group.finish();
}

criterion_group!(benches, bench_silhouette);
criterion_main!(benches);
