use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use matprod_bench::gaussian;
use matprod_core::relu::default_input;
use matprod_core::{
    chi_square_product_sampler, run_trials, Architecture, DistributionSpec, ReluNetConfig,
};

fn product(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_trials");
    let trials = 200;
    group.throughput(Throughput::Elements(trials as u64));
    for (n, depth, p) in [(16, 8, 1.0), (64, 16, 1.0), (64, 16, 0.5)] {
        let (config, u) = gaussian(n, depth, p);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{n}x{depth}/p={p}")),
            &(),
            |b, _| b.iter(|| run_trials(&config, &u, trials, 1).unwrap()),
        );
    }
    group.finish();
}

fn chi_square(c: &mut Criterion) {
    let mut group = c.benchmark_group("chi_square_product_sampler");
    group.throughput(Throughput::Elements(10_000));
    for n in [8, 64] {
        let widths = vec![n; 16];
        group.bench_with_input(BenchmarkId::from_parameter(n), &widths, |b, w| {
            b.iter(|| chi_square_product_sampler(w, 10_000, 1).unwrap())
        });
    }
    group.finish();
}

fn jacobian(c: &mut Criterion) {
    let config = ReluNetConfig::with_default_bias(
        Architecture::new(vec![8, 16, 16, 16]).unwrap(),
        DistributionSpec::StandardGaussian,
    )
    .unwrap();
    let u = matprod_core::UnitVector::uniform(8).unwrap();
    let x = default_input(8);
    c.bench_function("jacobian_batch/8,16x3", |b| {
        b.iter(|| matprod_core::relu::jacobian_batch(&config, &x, &u, 1000, 1).unwrap())
    });
}

criterion_group!(benches, product, chi_square, jacobian);
criterion_main!(benches);
