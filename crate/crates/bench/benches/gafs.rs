use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gafs_bench::fixture;
use gafs_core::eval::{acc, kmeans, DEFAULT_MAX_ITER};
use gafs_core::graph::build_graph;
use gafs_core::select::{fit, init_params, objective_context, GafsConfig};
use gafs_core::LabelVector;

fn objective_and_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("value_and_gradient");
    for &(d, n, m) in &[(100, 300, 10), (500, 300, 40)] {
        let (x, _) = fixture(d, n, 0);
        let cfg = GafsConfig {
            hidden_size: m,
            ..GafsConfig::default()
        };
        let (ctx, _) = objective_context(&x, &cfg).unwrap();
        let params = init_params(d, m, 0);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("d{d}_n{n}_m{m}")),
            &params,
            |b, p| b.iter(|| ctx.value_and_gradient(black_box(p)).unwrap()),
        );
    }
    group.finish();
}

fn knn_graph(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_graph");
    for &n in &[100, 300, 1000] {
        let (x, _) = fixture(100, n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| build_graph(black_box(x), 5).unwrap())
        });
    }
    group.finish();
}

fn clustering(c: &mut Criterion) {
    let (x, _) = fixture(100, 300, 2);
    c.bench_function("kmeans_k3_n300_d100", |b| {
        b.iter(|| kmeans(black_box(x.view()), 3, 7, DEFAULT_MAX_ITER).unwrap())
    });

    let k = 20;
    let truth = LabelVector::with_classes((0..2000).map(|i| i % k).collect(), k).unwrap();
    let pred =
        LabelVector::with_classes((0..2000).map(|i| (i * 7 + i / 13) % k).collect(), k).unwrap();
    c.bench_function("hungarian_acc_k20_n2000", |b| {
        b.iter(|| acc(black_box(&pred), black_box(&truth)).unwrap())
    });
}

fn end_to_end(c: &mut Criterion) {
    let (x, _) = fixture(100, 300, 3);
    let cfg = GafsConfig::default();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("d100_n300_m10", |b| {
        b.iter(|| fit(black_box(&x), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    objective_and_gradient,
    knn_graph,
    clustering,
    end_to_end
);
criterion_main!(benches);
