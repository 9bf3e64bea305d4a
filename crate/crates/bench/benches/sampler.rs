use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sbm_bench::fixture;
use sbm_core::inference::exact_posterior_over_assignments;
use sbm_core::model::block_stats;
use sbm_core::{DirichletWeights, GibbsSampler};

fn gibbs_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("gibbs_sweep");
    for n in [32usize, 128, 256] {
        let (_, a) = fixture(n, 2, 7);
        let alpha = DirichletWeights::symmetric(2, 0.5).unwrap();
        let mut sampler = GibbsSampler::new(&a, 2, alpha, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| sampler.sweep()));
    }
    group.finish();
}

fn block_statistics(c: &mut Criterion) {
    let (truth, a) = fixture(256, 4, 3);
    c.bench_function("block_stats_n256_k4", |b| {
        b.iter(|| block_stats(black_box(&a), black_box(&truth.assignment)).unwrap())
    });
}

fn enumeration_oracle(c: &mut Criterion) {
    let (_, a) = fixture(10, 2, 5);
    let alpha = DirichletWeights::symmetric(2, 0.5).unwrap();
    c.bench_function("exact_posterior_n10_k2", |b| {
        b.iter(|| exact_posterior_over_assignments(black_box(&a), 2, &alpha, 1 << 20).unwrap())
    });
}

criterion_group!(benches, gibbs_sweep, block_statistics, enumeration_oracle);
criterion_main!(benches);
