use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hamdelay_core::nullity::{default_atol, numerical_nullity, DEFAULT_RTOL};
use hamdelay_core::operator::random_instance;
use hamdelay_core::TimeGrid;

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble");
    for grid in [64, 256] {
        let spec = random_instance(2, 2, TimeGrid::new(grid).unwrap(), 1, false).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(grid), &spec, |b, s| {
            b.iter(|| black_box(s.assemble_matrix()))
        });
    }
    group.finish();
}

fn nullity(c: &mut Criterion) {
    let mut group = c.benchmark_group("svd_nullity");
    group.sample_size(10);
    for (n, grid) in [(1, 128), (1, 256), (2, 256)] {
        let spec = random_instance(n, 2, TimeGrid::new(grid).unwrap(), 2, false).unwrap();
        let m = spec.assemble_matrix();
        group.bench_with_input(BenchmarkId::new(format!("n{n}"), grid), &m, |b, m| {
            b.iter(|| numerical_nullity(black_box(m), default_atol(grid), DEFAULT_RTOL).unwrap())
        });
    }
    group.finish();
}

fn symmetry(c: &mut Criterion) {
    let spec = random_instance(2, 3, TimeGrid::new(256).unwrap(), 3, false).unwrap();
    c.bench_function("symmetry_defect/256", |b| {
        b.iter(|| black_box(spec.symmetry_defect(4, 7)))
    });
}

criterion_group!(benches, assembly, nullity, symmetry);
criterion_main!(benches);
