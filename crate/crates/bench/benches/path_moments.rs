use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use matprod_bench::gaussian;
use matprod_core::{brute_force_moment, exact_moment};

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_moment");
    let (config, u) = gaussian(32, 8, 0.5);
    for k in [2, 4, 6, 8] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| exact_moment(&config, &u, k).unwrap())
        });
    }
    group.finish();
}

fn brute(c: &mut Criterion) {
    let (config, u) = gaussian(3, 3, 0.5);
    c.bench_function("brute_force_moment/3x3/k=2", |b| {
        b.iter(|| brute_force_moment(&config, &u, 2).unwrap())
    });
}

criterion_group!(benches, exact, brute);
criterion_main!(benches);
