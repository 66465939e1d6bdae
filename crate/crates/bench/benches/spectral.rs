use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use levyhj_bench::{fractional_operator, random_field};
use std::hint::black_box;

fn semigroup(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_semigroup");
    for (d, n) in [(1, 4096), (1, 65536), (2, 256)] {
        let op = fractional_operator(d, n, 1.5);
        let phi = random_field(&op, 1);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("d{d}_n{n}")),
            &phi,
            |b, phi| b.iter(|| op.apply_semigroup(black_box(phi), 0.01).unwrap()),
        );
    }
    group.finish();
}

fn kernel_norm(c: &mut Criterion) {
    let op = fractional_operator(1, 4096, 1.5);
    c.bench_function("kernel_deriv_l1_norm/n4096_m1", |b| {
        b.iter(|| op.kernel_deriv_l1_norm(black_box(0.05), 1).unwrap())
    });
}

criterion_group!(benches, semigroup, kernel_norm);
criterion_main!(benches);
