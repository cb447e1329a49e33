use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use subdiff_bench::scalar_setup;
use subdiff_core::fast_history::{build_for_scheme, run_fast};
use subdiff_core::mittag_leffler::ml_neg;
use subdiff_core::stepper::run_direct;

fn history(c: &mut Criterion) {
    let mut group = c.benchmark_group("history");
    group.sample_size(10);
    for exp in [10u32, 12, 14] {
        let n = 1usize << exp;
        let (problem, scheme, approx) = scalar_setup(0.5, n);
        group.bench_with_input(BenchmarkId::new("direct", n), &n, |b, _| {
            b.iter(|| run_direct(black_box(&problem), &scheme).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fast", n), &n, |b, _| {
            b.iter(|| run_fast(black_box(&problem), &scheme, &approx).unwrap())
        });
    }
    group.finish();
}

fn build(c: &mut Criterion) {
    let (_, scheme, _) = scalar_setup(0.5, 1 << 14);
    c.bench_function("exp_sum_build_16384", |b| {
        b.iter(|| build_for_scheme(black_box(&scheme), 1e-10).unwrap())
    });
}

fn mittag_leffler(c: &mut Criterion) {
    c.bench_function("ml_neg_grid", |b| {
        b.iter(|| {
            let mut s = 0.0;
            for k in 1..=200 {
                s += ml_neg(0.6, black_box(0.1 * k as f64)).unwrap();
            }
            s
        })
    });
}

criterion_group!(benches, history, build, mittag_leffler);
criterion_main!(benches);
