use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use steamnet::par::Execution;
use steamnet::pde_oracle::{loss_sweep, OracleConfig};
use steamnet::simulate::{epsilon_sweep, make_step_scenario, StepSpec};
use steamnet::spectral::{trace_manifold, TraceOptions};
use steamnet::{Schedule, SystemParams};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn manifold(c: &mut Criterion) {
    let params = SystemParams::two_site_default()
        .with_schedules(
            vec![Schedule::constant(7e6), Schedule::constant(4e6)],
            vec![Schedule::constant(5e6); 2],
        )
        .unwrap();
    let mut g = c.benchmark_group("trace_manifold_16");
    for (name, exec) in MODES {
        let opts = TraceOptions {
            exec,
            ..TraceOptions::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| trace_manifold(&params, 0.0, (780e3, 860e3), 16, &opts).unwrap())
        });
    }
    g.finish();
}

fn eps_sweep(c: &mut Criterion) {
    let params = SystemParams::two_site_default();
    let sc = make_step_scenario(&StepSpec {
        t_end_s: 40.0,
        ..StepSpec::default()
    });
    let eps: Vec<f64> = (0..8).map(|k| params.epsilon / 2f64.powi(k)).collect();
    let mut g = c.benchmark_group("epsilon_sweep_8");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| epsilon_sweep(&sc, &params, &eps, exec).unwrap())
        });
    }
    g.finish();
}

fn oracle_losses(c: &mut Criterion) {
    let params = SystemParams::two_site_default();
    let sc = make_step_scenario(&StepSpec {
        t_end_s: 20.0,
        sample_interval_s: 0.5,
        ..StepSpec::default()
    });
    let cfg = OracleConfig::default();
    let losses = [0.0, 50.0, 100.0, 150.0, 200.0, 250.0];
    let mut g = c.benchmark_group("oracle_loss_sweep_6");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| loss_sweep(&params, &sc, &cfg, &losses, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, manifold, eps_sweep, oracle_losses);
criterion_main!(benches);
