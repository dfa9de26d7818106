#![allow(dead_code)]

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use steamnet::lumped::ReferenceQuantities;
use steamnet::{BoilerParams, Network, PipeParams, SaturationCurve, Schedule, SystemParams};

fn random_pipe(rng: &mut StdRng) -> PipeParams {
    PipeParams {
        length: rng.random_range(100.0..400.0),
        diameter: rng.random_range(0.1..0.3),
        friction: rng.random_range(0.01..0.03),
    }
}

/// Random spanning tree on `n` sites (random orientations) plus `chords`
/// extra links between distinct sites.
pub fn random_network(seed: u64, n: usize, chords: usize) -> Network {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut net = Network::new();
    for v in 0..n {
        net.add_site(format!("v{v}"), BoilerParams::table_default());
    }
    let mut links = 0;
    for v in 1..n {
        let u = rng.random_range(0..v);
        let (t, h) = if rng.random_bool(0.5) { (u, v) } else { (v, u) };
        net.add_pipe_by_index(format!("l{links}"), t, h, random_pipe(&mut rng));
        links += 1;
    }
    for _ in 0..chords {
        let t = rng.random_range(0..n);
        let mut h = rng.random_range(0..n - 1);
        if h >= t {
            h += 1;
        }
        net.add_pipe_by_index(format!("l{links}"), t, h, random_pipe(&mut rng));
        links += 1;
    }
    net
}

/// Balanced random heat inputs (W) with 5 MJ/s loads everywhere.
pub fn balanced_params(net: Network, seed: u64) -> SystemParams {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = net.n_sites();
    let mut heat: Vec<f64> = (0..n).map(|_| rng.random_range(3e6..7e6)).collect();
    let shift = (5e6 * n as f64 - heat.iter().sum::<f64>()) / n as f64;
    heat.iter_mut().for_each(|q| *q += shift);
    SystemParams::new(
        net,
        Arc::new(SaturationCurve::standard()),
        ReferenceQuantities::table_default(),
        heat.into_iter().map(Schedule::constant).collect(),
        vec![Schedule::constant(5e6); n],
    )
    .expect("random network is valid")
}

pub fn two_site_with(heat: (f64, f64)) -> SystemParams {
    SystemParams::two_site_default()
        .with_schedules(
            vec![Schedule::constant(heat.0), Schedule::constant(heat.1)],
            vec![Schedule::constant(5e6); 2],
        )
        .unwrap()
}
