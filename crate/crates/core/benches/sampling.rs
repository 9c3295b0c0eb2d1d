use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use llsp_core::exec::ExecMode;
use llsp_core::gen;
use llsp_core::harness::{self, Params, RunConfig};
use llsp_core::sampling::{check_zero, SampleConfig};
use llsp_core::symexpr::CoordSystem;

fn modes() -> [(&'static str, ExecMode); 2] {
    [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)]
}

/// Residuals that do not simplify away, so every sample point is evaluated.
fn pointwise(c: &mut Criterion) {
    let chart = CoordSystem::tangent(4);
    let vars: Vec<usize> = (0..chart.dim()).collect();
    let mut rng = gen::rng(9);
    let exprs: Vec<_> = (0..64).map(|_| gen::random_poly(&mut rng, &vars, 4, 12)).collect();
    let mut group = c.benchmark_group("check_zero");
    for samples in [100, 1000] {
        for (name, mode) in modes() {
            let cfg = SampleConfig {
                samples,
                tol: f64::INFINITY,
                mode,
                ..SampleConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(name, samples), &cfg, |b, cfg| {
                b.iter(|| check_zero("schouten", &chart, &exprs, cfg))
            });
        }
    }
    group.finish();
}

fn scenarios(c: &mut Criterion) {
    let mut group = c.benchmark_group("scenario");
    group.sample_size(10);
    for scenario in ["fibered_product", "heisenberg"] {
        for (name, mode) in modes() {
            let cfg = RunConfig {
                timing: false,
                mode,
                ..RunConfig::default()
            };
            group.bench_function(BenchmarkId::new(name, scenario), |b| {
                b.iter(|| harness::run_scenario(scenario, &cfg, &Params::new()).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, pointwise, scenarios);
criterion_main!(benches);
