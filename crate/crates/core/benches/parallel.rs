use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use cart_core::control::{estimate_k_with, BacksteppingDesign, KGrid, Region};
use cart_core::par::Execution;
use cart_core::simulate::{run_batch, IntegratorConfig, Scenario};
use cart_core::{ControlLaw, ModelParams, State};

fn params() -> ModelParams {
    ModelParams {
        r: 0.25,
        b: 1e-9,
        gamma: 1e-6,
        phi: 0.1,
        rho: 0.2,
        theta: 1e-8,
        alpha: 1e-11,
        epsilon: 0.3,
        mu: 0.06,
    }
}

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_estimate_k(c: &mut Criterion) {
    let p = params();
    let design = BacksteppingDesign::new(&p, 2.0, 1694.6, 0.0).unwrap();
    let region = Region::new((0.0, 5e3), (-1e5, 1e5));
    let mut group = c.benchmark_group("estimate_k");
    for (name, exec) in MODES {
        let grid = KGrid {
            execution: exec,
            ..KGrid::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| estimate_k_with(black_box(&p), &design, &region, 2.6e6, &grid).unwrap())
        });
    }
    group.finish();
}

fn bench_batch(c: &mut Criterion) {
    let p = params();
    let scenarios: Vec<Scenario> = (0..16)
        .map(|i| Scenario {
            params: p,
            initial: State::new(2e6, 0.0, 0.0),
            law: ControlLaw::backstepping(1.5 + 0.1 * i as f64, false),
            events: vec![],
            horizon: 100.0,
            integrator: IntegratorConfig::default(),
            xi: None,
        })
        .collect();
    let mut group = c.benchmark_group("scenario_batch");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_batch(black_box(&scenarios), exec))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_estimate_k, bench_batch);
criterion_main!(benches);
