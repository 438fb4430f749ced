use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use sirnet_bench::fixture;
use sirnet_core::{
    derivative, dominant_metzler, global_r, lerns, reproduction_matrix, run_scenario, simulate,
    spectral_radius,
};

fn rhs(c: &mut Criterion) {
    let (sc, mid) = fixture();
    let p = &sc.params;
    c.bench_function("derivative n=10 m=5", |b| {
        b.iter(|| derivative(p, black_box(&mid)))
    });
    c.bench_function("lerns n=10 m=5", |b| b.iter(|| lerns(p, black_box(&mid))));
}

fn spectral(c: &mut Criterion) {
    let (sc, mid) = fixture();
    let p = &sc.params;
    let ngm = reproduction_matrix(p, &mid.s);
    let metzler = p.metzler_matrix(&mid.s);
    c.bench_function("spectral_radius 15x15", |b| {
        b.iter(|| spectral_radius(black_box(&ngm)))
    });
    c.bench_function("dominant_metzler 15x15", |b| {
        b.iter(|| dominant_metzler(black_box(&metzler)))
    });
    c.bench_function("global_r", |b| b.iter(|| global_r(p, black_box(&mid))));
}

fn integrate(c: &mut Criterion) {
    let (sc, _) = fixture();
    let mut group = c.benchmark_group("runs");
    group.sample_size(10);
    group.bench_function("simulate default horizon", |b| {
        b.iter(|| simulate(&sc.params, &sc.initial, &sc.settings))
    });
    group.bench_function("run_scenario full pipeline", |b| {
        b.iter(|| run_scenario(&sc))
    });
    group.finish();
}

criterion_group!(benches, rhs, spectral, integrate);
criterion_main!(benches);
