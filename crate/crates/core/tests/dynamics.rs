mod common;

use common::two_site_with;
use steamnet::inner_limit::{build_inner, solve_equilibrium};
use steamnet::par::Execution;
use steamnet::simulate::{epsilon_sweep, integrate, make_step_scenario, ModelKind, StepSpec};
use steamnet::spectral::{trace_manifold, TraceOptions};
use steamnet::SystemParams;

fn step() -> steamnet::Scenario {
    make_step_scenario(&StepSpec::default())
}

#[test]
fn halving_tolerances_moves_final_state_less_than_coarse_tolerance() {
    let params = SystemParams::two_site_default();
    let mut coarse = step();
    coarse.solver.rtol = 1e-6;
    coarse.solver.atol = 1e-8;
    let mut fine = coarse.clone();
    fine.solver.rtol /= 2.0;
    fine.solver.atol /= 2.0;
    let a = integrate(ModelKind::Full, &coarse, &params).unwrap();
    let b = integrate(ModelKind::Full, &fine, &params).unwrap();
    let refs = params.refs;
    let k = a.len() - 1;
    for v in 0..2 {
        let (x, y) = (a.pressures_pa[k][v] / refs.pressure, b.pressures_pa[k][v] / refs.pressure);
        assert!((x - y).abs() <= coarse.solver.rtol * x.abs() + coarse.solver.atol);
    }
    let (x, y) = (a.velocities_mps[k][0] / refs.velocity, b.velocities_mps[k][0] / refs.velocity);
    assert!((x - y).abs() <= coarse.solver.rtol * x.abs() + coarse.solver.atol);
}

#[test]
fn pressures_move_by_order_epsilon_while_velocity_moves_by_order_one() {
    let params = SystemParams::two_site_default();
    let ts = integrate(ModelKind::Full, &step(), &params).unwrap();
    let refs = params.refs;
    let i0 = ts.index_at(10.0).unwrap();
    let i1 = ts.index_at(40.0).unwrap();
    let du = (ts.velocities_mps[i1][0] - ts.velocities_mps[i0][0]).abs() / refs.velocity;
    let dp = (0..2)
        .map(|v| (ts.pressures_pa[i1][v] - ts.pressures_pa[i0][v]).abs() / refs.pressure)
        .fold(0.0, f64::max);
    let ratio = dp / du;
    let eps = params.epsilon;
    assert!(ratio > eps / 3.0 && ratio < eps * 3.0, "ratio {ratio:e}, eps {eps:e}");
    // the pressure level itself moves only at second order for balanced inputs
    let mean = ts.mean_pressure();
    assert!((mean[i1] - mean[i0]).abs() / refs.pressure < eps * eps);
}

#[test]
fn step_transient_energy_decays_monotonically() {
    // V = ½ Σ G_i (ψ_i − ψ̄_G − ψ*_i)² + ½ Σ H_l (q_l − q*_l)² is a Lyapunov
    // function of the inner limit; along the full model it must decay too
    // once the step has been applied, up to O(ε) effects.
    let params = SystemParams::two_site_default();
    let ts = integrate(ModelKind::Full, &step(), &params).unwrap();
    let sc = step();
    let p = sc.apply(&params).unwrap();
    let sys = build_inner(&p, 1.0, 20.0).unwrap();
    let eq = solve_equilibrium(&sys).unwrap();
    let refs = p.refs;
    let eps = p.epsilon;
    let g_sum: f64 = sys.g.iter().sum();
    let energy: Vec<f64> = (0..ts.len())
        .map(|i| {
            let psi: Vec<f64> = ts.pressures_pa[i].iter().map(|x| (x / refs.pressure - 1.0) / eps).collect();
            let mean = psi.iter().zip(&sys.g).map(|(p, g)| p * g).sum::<f64>() / g_sum;
            let vp: f64 = psi
                .iter()
                .zip(&eq.psi0)
                .zip(&sys.g)
                .map(|((p, s), g)| 0.5 * g * (p - mean - s).powi(2))
                .sum();
            let q = ts.velocities_mps[i][0] / refs.velocity * sys.area[0];
            vp + 0.5 * sys.h[0] * (q - eq.q_star[0]).powi(2)
        })
        .collect();
    let start = ts.index_at(10.0).unwrap();
    let peak = energy[start];
    for w in energy[start..].windows(2) {
        assert!(w[1] <= w[0] + 1e-6 * peak, "{} -> {}", w[0], w[1]);
    }
    assert!(*energy.last().unwrap() < 1e-4 * peak);
}

#[test]
fn step_trajectory_reaches_traced_manifold() {
    let params = two_site_with((6e6, 4e6));
    let ts = integrate(ModelKind::Full, &step(), &SystemParams::two_site_default()).unwrap();
    let tr = trace_manifold(&params, 0.0, (799.9e3, 800.1e3), 3, &TraceOptions::default()).unwrap();
    let k = ts.len() - 1;
    let star = tr.fast_at(&params, ts.mean_pressure()[k]).unwrap()[0];
    let dp = ts.pressures_pa[k][0] - ts.pressures_pa[k][1];
    assert!((dp - star.0).abs() < 1e-3 * star.0.abs());
    assert!((ts.velocities_mps[k][0] - star.1).abs() < 1e-3 * star.1.abs());
}

#[test]
fn inner_limit_error_shrinks_with_epsilon() {
    let params = SystemParams::two_site_default();
    let t_r = params.refs.time();
    let mut sc = make_step_scenario(&StepSpec {
        before_w: vec![6e6, 4e6],
        t_end_s: t_r,
        sample_interval_s: t_r / 20.0,
        ..StepSpec::default()
    });
    sc.solver.rtol = 1e-11;
    sc.solver.atol = 1e-13;
    let eps0 = params.epsilon;
    let runs = epsilon_sweep(&sc, &params, &[eps0, eps0 / 2.0], Execution::Parallel).unwrap();
    let err = |(a, b): &(steamnet::TimeSeries, steamnet::TimeSeries)| {
        (0..a.len())
            .flat_map(|i| (0..2).map(move |v| (a.pressures_pa[i][v] - b.pressures_pa[i][v]).abs()))
            .fold(0.0, f64::max)
    };
    let ratio = err(&runs[0]) / err(&runs[1]);
    assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
}

#[test]
fn sequential_and_parallel_sweeps_agree() {
    let params = SystemParams::two_site_default();
    let mut sc = step();
    sc.t_end_s = 20.0;
    let eps = [params.epsilon, params.epsilon / 2.0];
    let a = epsilon_sweep(&sc, &params, &eps, Execution::Sequential).unwrap();
    let b = epsilon_sweep(&sc, &params, &eps, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}
