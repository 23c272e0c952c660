use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use vscfdi::attacksynth::{synthesize, AttackSpec};
use vscfdi::harness::{run_trial, TrialSettings};
use vscfdi::measmodel::{eval_h, eval_jacobian, StateVector};
use vscfdi::wls::estimate;
use vscfdi_bench::fixture;

fn bench_model(c: &mut Criterion) {
    let f = fixture(1, 1);
    c.bench_function("eval_h_group1", |b| {
        b.iter(|| eval_h(&f.case, &f.config, black_box(&f.truth)))
    });
    c.bench_function("eval_jacobian_group1", |b| {
        b.iter(|| eval_jacobian(&f.case, &f.config, black_box(&f.truth)))
    });
}

fn bench_estimate(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate");
    for group in [1u8, 8] {
        let f = fixture(group, 1);
        let flat = StateVector::flat(f.case.n_bus());
        g.bench_with_input(BenchmarkId::from_parameter(group), &f, |b, f| {
            b.iter(|| estimate(&f.case, &f.config, black_box(&f.z), &flat).unwrap())
        });
    }
    g.finish();
}

fn bench_synthesize(c: &mut Criterion) {
    let mut g = c.benchmark_group("synthesize");
    g.sample_size(20);
    let f = fixture(1, 1);
    for r in [1.0, 0.85] {
        let spec = AttackSpec::new(&f.case, r, r);
        g.bench_with_input(BenchmarkId::from_parameter(r), &spec, |b, spec| {
            b.iter(|| synthesize(&f.case, &f.config, &f.z, &f.x_hat, spec).unwrap())
        });
    }
    g.finish();
}

fn bench_trial(c: &mut Criterion) {
    let f = fixture(1, 1);
    let settings = TrialSettings::new(1, 1.0);
    let mut g = c.benchmark_group("trial");
    g.sample_size(20);
    g.bench_function("group1_r1", |b| {
        b.iter(|| run_trial(&f.case, &f.truth, &settings, black_box(7)).unwrap())
    });
    g.finish();
}

criterion_group!(
    benches,
    bench_model,
    bench_estimate,
    bench_synthesize,
    bench_trial
);
criterion_main!(benches);
