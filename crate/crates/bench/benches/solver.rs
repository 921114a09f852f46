use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use trapping_bench::{base_cover, base_model};
use trapping_core::insured::{build_solution, evaluate_y, SolverSettings};
use trapping_core::simulator::{estimate_curve, SimConfig};

fn build(c: &mut Criterion) {
    let (m, ins) = (base_model(), base_cover());
    let mut group = c.benchmark_group("build_solution");
    group.sample_size(10);
    for depth in [1, 2, 3] {
        let settings = SolverSettings::with_depth(depth);
        group.bench_with_input(BenchmarkId::from_parameter(depth), &settings, |bench, s| {
            bench.iter(|| build_solution(black_box(&m), black_box(&ins), s).unwrap())
        });
    }
    group.finish();

    let sol = build_solution(&m, &ins, &SolverSettings::default()).unwrap();
    let upper = sol.grid.upper();
    c.bench_function("evaluate_y", |bench| {
        bench.iter(|| {
            (0..100)
                .map(|i| evaluate_y(&sol, black_box(upper * i as f64 / 100.0)).unwrap())
                .sum::<f64>()
        })
    });
}

fn simulate(c: &mut Criterion) {
    let (m, ins) = (base_model(), base_cover());
    let cfg = SimConfig::new(2000, 500.0, 1).unwrap();
    let mut group = c.benchmark_group("estimate_curve");
    group.sample_size(10);
    group.bench_function("insured_2000_paths", |bench| {
        bench.iter(|| estimate_curve(black_box(&[2.0]), &m, Some(&ins), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, build, simulate);
criterion_main!(benches);
