use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use poisson_mrs::baselines::pmrf_neighborhoods;
use poisson_mrs::graph::random_dag;
use poisson_mrs::mrs::{mrs_learn, DegeneratePolicy, MrsConfig};
use poisson_mrs::par::parallel_enabled;
use poisson_mrs::simulate::{simulate, CountMatrix, Link, ParamRanges, SampleOptions};

fn data(p: usize, n: usize) -> CountMatrix {
    let dag = random_dag(p, 2, 1).unwrap();
    let ranges = ParamRanges {
        intercept: (0.5, 1.5),
        weight_magnitude: (0.05, 0.3),
    };
    simulate(&dag, Link::Log, &ranges, n, 2, &SampleOptions::default()).unwrap().data
}

/// `jobs = 1` forces the sequential path; `jobs = 0` uses the worker pool
/// when the `parallel` feature is compiled in.
fn learners(c: &mut Criterion) {
    let d = data(12, 300);
    let mut group = c.benchmark_group(if parallel_enabled() { "parallel-build" } else { "sequential-build" });
    group.sample_size(10);
    for jobs in [1usize, 0] {
        let label = if jobs == 1 { "sequential" } else { "pool" };
        let fixed = MrsConfig {
            fixed_lambda: Some(0.05),
            degenerate: DegeneratePolicy::Quarantine,
            jobs,
            ..MrsConfig::default()
        };
        group.bench_with_input(BenchmarkId::new("mrs_fixed_lambda", label), &fixed, |b, cfg| {
            b.iter(|| mrs_learn(black_box(&d), cfg).unwrap())
        });
        let cv = MrsConfig {
            fixed_lambda: None,
            grid_size: 10,
            ..fixed.clone()
        };
        group.bench_with_input(BenchmarkId::new("mrs_cv", label), &cv, |b, cfg| {
            b.iter(|| mrs_learn(black_box(&d), cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("pmrf_cv", label), &cv, |b, cfg| {
            b.iter(|| pmrf_neighborhoods(black_box(&d), cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, learners);
criterion_main!(benches);
