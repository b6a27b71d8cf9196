//! Sequential versus rayon execution of the hot paths.
//!
//! Each workload runs inside a one-thread pool and inside the default pool.
//! Build with `--no-default-features` to time the plain sequential fallback.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rand::Rng;

use chip_core::estimation::{fit_with_assignment, FitConfig};
use chip_core::kmeans::{kmeans, KMeansConfig};
use chip_core::network::{expand_simplified, sample_counts, sample_network, ChipModelSpec};
use chip_core::spectral::{cluster_counts, SpectralConfig};
use chip_core::{rng, CommunityAssignment, MatrixKind, SimplifiedSpec};

fn model(n: usize) -> (ChipModelSpec, CommunityAssignment) {
    let spec = SimplifiedSpec {
        n,
        k: 4,
        mu1: 0.085,
        alpha1: 0.06,
        beta1: 0.08,
        mu2: 0.065,
        alpha2: 0.06,
        beta2: 0.08,
        horizon: 32.0,
    };
    (expand_simplified(&spec).unwrap(), CommunityAssignment::balanced(n, 4).unwrap())
}

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let default = rayon::current_num_threads();
    let mut sizes = vec![1];
    if default > 1 {
        sizes.push(default);
    }
    sizes
        .into_iter()
        .map(|t| (format!("{t}-thread"), rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap()))
        .collect()
}

fn bench_sampling(c: &mut Criterion) {
    let (spec, truth) = model(256);
    let mut group = c.benchmark_group("sample_counts/n256");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| black_box(sample_counts(&spec, &truth, 7).unwrap())))
        });
    }
    group.finish();
}

fn bench_kmeans(c: &mut Criterion) {
    let mut r = rng::seeded(3);
    let points = DMatrix::from_fn(4000, 8, |i, _| (i % 8) as f64 + r.random::<f64>());
    let config = KMeansConfig::default();
    let mut group = c.benchmark_group("kmeans/4000x8_k8");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| black_box(kmeans(&points, 8, 11, &config).unwrap())))
        });
    }
    group.finish();
}

fn bench_clustering(c: &mut Criterion) {
    let (spec, truth) = model(512);
    let counts = sample_counts(&spec, &truth, 5).unwrap();
    let config = SpectralConfig::default();
    let mut group = c.benchmark_group("cluster_counts/n512");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| black_box(cluster_counts(&counts, MatrixKind::Weighted, 4, 1, &config).unwrap())))
        });
    }
    group.finish();
}

fn bench_fitting(c: &mut Criterion) {
    let (spec, truth) = model(128);
    let net = sample_network(&spec, &truth, 2).unwrap().network;
    let config = FitConfig::default();
    let mut group = c.benchmark_group("fit_with_assignment/n128");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| black_box(fit_with_assignment(&net, &truth, &config).unwrap())))
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_sampling, bench_kmeans, bench_clustering, bench_fitting
}
criterion_main!(benches);
