use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sord_core::{
    encode_sord, enumerate_orderings, materialize, DistanceSpec, EncodingParams, Geometry,
    RankAssignment,
};

fn sord(c: &mut Criterion) {
    let mut group = c.benchmark_group("encode_sord");
    let spec = DistanceSpec::circular(1.0).unwrap();
    for k in [4, 16, 64] {
        let ranks = RankAssignment::equally_spaced_circular(k).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(k), &ranks, |b, r| {
            b.iter(|| encode_sord(black_box(r), &spec).unwrap())
        });
    }
    group.finish();
}

fn orderings(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumerate_orderings");
    for k in [4, 5, 6, 7] {
        let positions = RankAssignment::equally_spaced_circular(k)
            .unwrap()
            .ranks()
            .to_vec();
        group.bench_with_input(BenchmarkId::from_parameter(k), &positions, |b, p| {
            b.iter(|| enumerate_orderings(k, black_box(p), Geometry::Circular).unwrap())
        });
    }
    group.finish();
}

fn learned(c: &mut Criterion) {
    let mut group = c.benchmark_group("materialize");
    for k in [4, 16, 64] {
        let alpha: Vec<Vec<f64>> = (0..k)
            .map(|t| (0..k - 1).map(|i| ((t * k + i) as f64).sin()).collect())
            .collect();
        let params = EncodingParams::new(alpha, 0.855).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(k), &params, |b, p| {
            b.iter(|| materialize(black_box(p)))
        });
    }
    group.finish();
}

criterion_group!(benches, sord, orderings, learned);
criterion_main!(benches);
