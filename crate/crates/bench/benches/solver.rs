use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use levyhj_bench::{fractional_operator, quadratic_hamiltonian, random_field};
use levyhj_core::{MildSolver, SolverConfig};
use std::hint::black_box;

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_case_one");
    group.sample_size(10);
    for n in [256, 4096] {
        let op = fractional_operator(1, n, 1.6);
        let ham = quadratic_hamiltonian(&op);
        let u0 = random_field(&op, 3).scaled(0.2).unwrap();
        let solver = MildSolver::new(&op, &ham, &SolverConfig::case_one(0.05, 20)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &u0, |b, u0| {
            b.iter(|| solver.solve(black_box(u0)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, solve);
criterion_main!(benches);
