use steamnet::par::Execution;
use steamnet::pde_oracle::{
    build_oracle, integrate_oracle, loss_sweep, step_oracle, LinearEos, OracleConfig,
};
use steamnet::simulate::{make_step_scenario, InitialCondition, Scenario, SolverOptions, StepSpec};
use steamnet::{SaturationCurve, Schedule, SystemParams};

#[test]
fn eos_reproduces_saturated_density_at_820_kpa() {
    let curve = SaturationCurve::standard();
    let eos = LinearEos::at(&curve, 800e3).unwrap();
    let exact = curve.sat_props(820e3).unwrap().rho_s;
    let (rho, _) = eos.saturated(820e3);
    assert!((rho - exact).abs() / exact < 5e-3);
}

#[test]
fn uniform_equilibrium_is_preserved_for_100_s() {
    let params = SystemParams::two_site_default();
    let (oracle, mut st) = build_oracle(&params, &OracleConfig::default(), 800e3).unwrap();
    let init = st.clone();
    for _ in 0..100 {
        step_oracle(&oracle, &mut st, 1.0).unwrap();
    }
    assert!((st.t_s - 100.0).abs() < 1e-9);
    for (a, b) in st.boiler_p.iter().zip(&init.boiler_p) {
        assert!((a - b).abs() / b < 1e-6);
    }
    for (g, g0) in st.pipes.iter().zip(&init.pipes) {
        for i in 0..g.cells {
            assert!((g.rho[i] - g0.rho[i]).abs() / g0.rho[i] < 1e-6);
            assert!((g.energy[i] - g0.energy[i]).abs() / g0.energy[i].abs() < 1e-6);
        }
    }
}

#[test]
fn closed_system_conserves_mass_and_energy() {
    let params = SystemParams::two_site_default()
        .with_schedules(vec![Schedule::constant(0.0); 2], vec![Schedule::constant(0.0); 2])
        .unwrap();
    let (oracle, _) = build_oracle(&params, &OracleConfig::default(), 800e3).unwrap();
    // start with a pressure imbalance so that steam actually moves
    let mut st = oracle.state_from(&[805e3, 795e3], &[0.0]);
    let m0 = st.pipe_mass() - st.mass_in;
    let e0 = st.pipe_energy() - st.energy_in;
    let mut flux = 0.0_f64;
    for _ in 0..100 {
        step_oracle(&oracle, &mut st, 1.0).unwrap();
        flux = st.pipes[0].momentum.iter().fold(flux, |a, m| a.max(m.abs()));
    }
    let m1 = st.pipe_mass() - st.mass_in;
    let e1 = st.pipe_energy() - st.energy_in;
    assert!(flux > 1.0, "no steam moved");
    assert!((m1 - m0).abs() / m0.abs() < 1e-8);
    assert!((e1 - e0).abs() / e0.abs() < 1e-8);
}

fn short_step() -> Scenario {
    make_step_scenario(&StepSpec {
        t_end_s: 30.0,
        sample_interval_s: 1.0,
        ..StepSpec::default()
    })
}

#[test]
fn grid_refinement_is_first_order() {
    let params = SystemParams::two_site_default();
    let runs: Vec<_> = [20, 40, 80]
        .iter()
        .map(|&cells| {
            let cfg = OracleConfig {
                cells,
                ..OracleConfig::default()
            };
            let (o, _) = build_oracle(&params, &cfg, 800e3).unwrap();
            integrate_oracle(&o, &short_step()).unwrap()
        })
        .collect();
    let diff = |a: &steamnet::TimeSeries, b: &steamnet::TimeSeries| {
        let ea = a.pipe_ends_mps.as_ref().unwrap();
        let eb = b.pipe_ends_mps.as_ref().unwrap();
        (0..a.len()).map(|i| (ea[i][0].0 - eb[i][0].0).abs()).fold(0.0, f64::max)
    };
    let ratio = diff(&runs[0], &runs[1]) / diff(&runs[1], &runs[2]);
    assert!(ratio > 1.5 && ratio < 3.0, "ratio {ratio}");
}

#[test]
fn larger_heat_loss_decays_pressure_faster() {
    let params = SystemParams::two_site_default();
    let sc = Scenario {
        heat: vec![Schedule::constant(5e6); 2],
        loads: vec![Schedule::constant(5e6); 2],
        t_start_s: 0.0,
        t_end_s: 120.0,
        sample_interval_s: 10.0,
        initial: InitialCondition::Uniform { pressure_pa: 800e3 },
        solver: SolverOptions::default(),
    };
    let cfg = OracleConfig {
        cells: 20,
        ..OracleConfig::default()
    };
    let runs = loss_sweep(&params, &sc, &cfg, &[0.0, 100.0, 200.0], Execution::Parallel).unwrap();
    let rate = |ts: &steamnet::TimeSeries| {
        let m = ts.mean_pressure();
        let k = m.len() - 1;
        // late-horizon decay rate, Pa/s
        (m[k - 6] - m[k]) / (ts.t_s[k] - ts.t_s[k - 6])
    };
    let r: Vec<f64> = runs.iter().map(rate).collect();
    assert!(r[0].abs() < 1e-6, "{r:?}");
    assert!(r[1] > r[0] && r[2] > r[1], "{r:?}");
}

#[test]
fn oracle_csv_has_pipe_end_columns() {
    let params = SystemParams::two_site_default();
    let mut sc = short_step();
    sc.t_end_s = 2.0;
    let (o, _) = build_oracle(&params, &OracleConfig::default(), 800e3).unwrap();
    let ts = integrate_oracle(&o, &sc).unwrap();
    let mut buf = Vec::new();
    ts.write_csv(&mut buf).unwrap();
    let header = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
    assert_eq!(
        header,
        "t_s,p_site1_Pa,p_site2_Pa,u_pipe1_mps,u0_pipe1_mps,uL_pipe1_mps,Qo_site1_W,Qo_site2_W,validity_ratio"
    );
}
