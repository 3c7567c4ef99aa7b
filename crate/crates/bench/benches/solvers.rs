use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dualpi::dpi::{self, DpiConfig};
use dualpi::oracle::{minimax_safety_enum, ENUM_BUDGET};
use dualpi::safety::optimal_safety;
use dualpi::{RestrictedMatrixGame, SolverSettings};
use dualpi_bench::{corner_grid, feasible_random, random};
use std::hint::black_box;

fn safety_fixed_point(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimal_safety");
    for n in [8, 64, 256] {
        let spec = random(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &spec, |b, spec| {
            b.iter(|| optimal_safety(black_box(spec), SolverSettings::default()).unwrap())
        });
    }
    g.finish();
}

fn matrix_game(c: &mut Criterion) {
    let mut g = c.benchmark_group("matrix_game");
    for k in [3usize, 5, 10] {
        let a: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| ((i * 7 + j * 13) % 11) as f64 / 5.0 - 1.0).collect())
            .collect();
        g.bench_with_input(BenchmarkId::from_parameter(k), &a, |b, a| {
            b.iter(|| RestrictedMatrixGame::full(black_box(a.clone())).unwrap().solve().unwrap())
        });
    }
    g.finish();
}

fn dual_policy_iteration(c: &mut Criterion) {
    let mut g = c.benchmark_group("dpi_run");
    g.sample_size(20);
    for (name, spec) in [("random8", feasible_random(8)), ("random32", feasible_random(32)), ("grid8", corner_grid(8))] {
        g.bench_function(name, |b| b.iter(|| dpi::run(black_box(&spec), &DpiConfig::default()).unwrap()));
    }
    g.finish();
}

fn enumeration(c: &mut Criterion) {
    let spec = random(4, 0);
    c.bench_function("minimax_safety_enum/4", |b| {
        b.iter(|| minimax_safety_enum(black_box(&spec), ENUM_BUDGET).unwrap())
    });
}

criterion_group!(benches, safety_fixed_point, matrix_game, dual_policy_iteration, enumeration);
criterion_main!(benches);
