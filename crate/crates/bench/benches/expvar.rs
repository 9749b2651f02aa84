use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use expvar_bench::fixture;
use expvar_core::{optimal_projected_var, report, solve_weighted, sparsify_loadings, FixedPointOptions, Init, SolveOptions, Weights};

fn bench_report(c: &mut Criterion) {
    let mut group = c.benchmark_group("report");
    for lambda in [0.2, 0.6] {
        let (a, z) = fixture(lambda);
        group.bench_with_input(BenchmarkId::from_parameter(lambda), &lambda, |b, _| {
            b.iter(|| report(black_box(&a), black_box(&z)).unwrap())
        });
    }
    group.finish();
}

fn bench_optimal_projection(c: &mut Criterion) {
    let (a, z) = fixture(0.6);
    c.bench_function("optimal_projected_var", |b| {
        b.iter(|| optimal_projected_var(black_box(&a), black_box(&z), None, FixedPointOptions::default()).unwrap())
    });
}

fn bench_solve(c: &mut Criterion) {
    let (a, _) = fixture(0.0);
    let w = Weights::decreasing(4);
    c.bench_function("solve_weighted", |b| {
        b.iter(|| solve_weighted(black_box(&a), 4, &w, SolveOptions::default(), Init::Random { seed: 3 }).unwrap())
    });
}

fn bench_sparsify(c: &mut Criterion) {
    let (a, _) = fixture(0.0);
    c.bench_function("sparsify_loadings", |b| b.iter(|| sparsify_loadings(black_box(&a), 4, 0.7).unwrap()));
}

criterion_group!(benches, bench_report, bench_optimal_projection, bench_solve, bench_sparsify);
criterion_main!(benches);
