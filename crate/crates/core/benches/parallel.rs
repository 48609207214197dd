//! One worker against the full pool on a regression sweep and a Type-I solve.
//!
//! Build with `--no-default-features` to time the sequential fallback instead.

use bsvie::catalog::scenario;
use bsvie::par;
use bsvie::regression::{BasisConfig, Regressor};
use bsvie::solver::SolverConfig;
use bsvie::stochastic::{BrownianEnsemble, TimeGrid};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pools() -> Vec<(String, Option<usize>)> {
    vec![("one".into(), Some(1)), (format!("all-{}", par::current_threads()), None)]
}

fn regression(c: &mut Criterion) {
    let ens = BrownianEnsemble::simulate(TimeGrid::new(1.0, 20).unwrap(), 50_000, 1).unwrap();
    let data: Vec<f64> = ens.w(20).iter().map(|w| w.sin()).collect();
    let mut group = c.benchmark_group("regression");
    for (label, threads) in pools() {
        group.bench_function(BenchmarkId::new("fit_all_nodes", label), |b| {
            b.iter(|| {
                par::with_threads(threads, || {
                    let reg = Regressor::new(&ens, BasisConfig::default()).unwrap();
                    (0..20).map(|k| reg.project(k, &data, 1)[0]).sum::<f64>()
                })
            })
        });
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let sc = scenario("example-1.1", None).unwrap();
    let ens = BrownianEnsemble::simulate(sc.grid(20).unwrap(), 20_000, 1).unwrap();
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("solve_type1");
    group.sample_size(10);
    for (label, threads) in pools() {
        group.bench_function(BenchmarkId::new("example-1.1", label), |b| {
            b.iter(|| par::with_threads(threads, || sc.solve(&ens, &cfg).unwrap().beta))
        });
    }
    group.finish();
}

criterion_group!(benches, regression, solve);
criterion_main!(benches);
