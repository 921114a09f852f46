use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use trapping_core::special::{gauss_2f1, ComplexScalar};

fn regimes(c: &mut Criterion) {
    let a = ComplexScalar::new(0.5, 1.3);
    let b = a.conj();
    let cc = ComplexScalar::new(1.7, 0.0);
    let mut group = c.benchmark_group("gauss_2f1");
    for z in [-5.0, -0.3, 0.5, 0.95, 0.9999] {
        group.bench_with_input(BenchmarkId::from_parameter(z), &z, |bench, &z| {
            bench.iter(|| gauss_2f1(black_box(a), black_box(b), black_box(cc), black_box(z)))
        });
    }
    group.finish();
}

criterion_group!(benches, regimes);
criterion_main!(benches);
