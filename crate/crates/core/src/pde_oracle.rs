//! Reference solution of the distributed pipe equations coupled to the
//! boilers, used to validate the lumped model.
//!
//! Each pipe is a staggered finite-volume grid: density `ρ` and energy
//! density `E = ρh − p` live in cells, momentum `ρu` on faces. Mass and
//! enthalpy fluxes are upwinded, the pressure gradient is central, Darcy
//! friction is treated implicitly. Time stepping is semi-implicit Euler
//! (cells first, then faces with the updated pressure) under a CFL bound.
//! Boilers at the pipe ends evolve by `e(p) dp/dt = Q' − m'_s h_c` with
//! `m'_s h_c` taken from the boundary fluxes, so the coupling is conservative.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lumped::{ModelError, SystemParams};
use crate::par::{self, Execution};
use crate::simulate::{InitialCondition, Scenario, ScenarioError, SolverStats, TimeSeries};
use crate::thermo::{BoilerParams, SaturationCurve, ThermoError};

/// First-order steam closure about the saturated-vapour anchor `(p0, ρ0, h0)`:
/// `p = p0 + a (ρ − ρ0) + b (h − h0)`.
///
/// `a` and `b` linearize the wet-steam relation `v = v_f + (h − h_f) v_fg / h_fg`
/// at quality one, so along the saturation line the closure reduces to
/// `ρ = ρ0 + ρ_s'(p0)(p − p0)`, `h = h0 + h_s'(p0)(p − p0)`; off it, added or
/// removed heat changes the pressure through condensation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearEos {
    pub p0: f64,
    pub rho0: f64,
    pub h0: f64,
    pub a: f64,
    pub b: f64,
    /// `dρ_s/dp` at the anchor.
    pub c_rho: f64,
    /// `dh_s/dp` at the anchor.
    pub c_h: f64,
}

impl LinearEos {
    pub fn at(curve: &SaturationCurve, p0: f64) -> Result<Self, ThermoError> {
        let s = curve.sat_props(p0)?;
        let v_fg = 1.0 / s.rho_s - 1.0 / s.rho_w;
        let h_fg = s.h_s - s.h_w;
        let k = v_fg / h_fg;
        let dv_g = -s.d_rho_s_dp / (s.rho_s * s.rho_s);
        let d = dv_g - k * s.d_h_s_dp;
        Ok(Self {
            p0,
            rho0: s.rho_s,
            h0: s.h_s,
            a: -1.0 / (s.rho_s * s.rho_s * d),
            b: -k / d,
            c_rho: s.d_rho_s_dp,
            c_h: s.d_h_s_dp,
        })
    }

    pub fn pressure(&self, rho: f64, h: f64) -> f64 {
        self.p0 + self.a * (rho - self.rho0) + self.b * (h - self.h0)
    }

    /// `h` from `ρ` and `E = ρh − p`.
    pub fn enthalpy(&self, rho: f64, energy: f64) -> f64 {
        (energy + self.p0 + self.a * (rho - self.rho0) - self.b * self.h0) / (rho - self.b)
    }

    /// Linearized saturated-vapour `(ρ, h)` at pressure `p`.
    pub fn saturated(&self, p: f64) -> (f64, f64) {
        (self.rho0 + self.c_rho * (p - self.p0), self.h0 + self.c_h * (p - self.p0))
    }

    /// Isentropic sound speed `√(a / (1 − b/ρ))`.
    pub fn sound_speed(&self, rho: f64) -> f64 {
        (self.a / (1.0 - self.b / rho)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Cells per pipe (≥ 10).
    pub cells: usize,
    /// Heat loss per unit pipe length (W/m, positive = loss).
    #[serde(default)]
    pub loss_w_per_m: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// EOS anchor; defaults to the initial mean boiler pressure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_pa: Option<f64>,
}

fn default_cfl() -> f64 {
    0.5
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            cells: 50,
            loss_w_per_m: 0.0,
            cfl: 0.5,
            anchor_pa: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("need at least 10 cells per pipe, got {0}")]
    TooFewCells(usize),
    #[error("CFL number must lie in (0, 1], got {0}")]
    BadCfl(f64),
    #[error("heat loss must be finite, got {0}")]
    BadLoss(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("boiler {vertex} at t = {t_s:.4} s: {source}")]
    Thermo {
        vertex: String,
        t_s: f64,
        #[source]
        source: ThermoError,
    },
    #[error("non-positive density in pipe {pipe}, cell {cell} at t = {t_s:.4} s")]
    Density { pipe: String, cell: usize, t_s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipeGrid {
    pub cells: usize,
    pub dx: f64,
    pub area: f64,
    pub diameter: f64,
    pub friction: f64,
    /// Volumetric heat source `Q_w` (W/m³); negative for a loss.
    pub q_w: f64,
    pub tail: usize,
    pub head: usize,
    pub rho: Vec<f64>,
    /// `ρh − p` per cell (J/m³).
    pub energy: Vec<f64>,
    /// `ρu` per face, `cells + 1` entries (kg/(m² s)).
    pub momentum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleState {
    pub t_s: f64,
    pub boiler_p: Vec<f64>,
    pub pipes: Vec<PipeGrid>,
    /// Mass that has entered the pipes through their ends (kg).
    pub mass_in: f64,
    /// Energy `∫ρuh` that has entered through pipe ends plus wall heat (J).
    pub energy_in: f64,
}

impl OracleState {
    /// Mass held in all pipes (kg).
    pub fn pipe_mass(&self) -> f64 {
        self.pipes
            .iter()
            .map(|g| g.rho.iter().sum::<f64>() * g.dx * g.area)
            .sum()
    }

    /// `∫(ρh − p) dV` over all pipes (J).
    pub fn pipe_energy(&self) -> f64 {
        self.pipes
            .iter()
            .map(|g| g.energy.iter().sum::<f64>() * g.dx * g.area)
            .sum()
    }
}

/// Per-step boundary diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    /// `(u(0), u(L))` per pipe (m/s).
    pub ends_mps: Vec<(f64, f64)>,
    /// Face-averaged velocity per pipe (m/s).
    pub mean_mps: Vec<f64>,
    /// `m'_s h_c` per boiler (W).
    pub heat_outputs_w: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Oracle {
    pub params: SystemParams,
    pub config: OracleConfig,
    pub eos: LinearEos,
    boilers: Vec<BoilerParams>,
}

/// Sets up the oracle for `params` with the EOS anchored at `anchor_pa` (or
/// the configured anchor) and returns the uniform rest state there.
pub fn build_oracle(
    params: &SystemParams,
    config: &OracleConfig,
    anchor_pa: f64,
) -> Result<(Oracle, OracleState), OracleError> {
    if config.cells < 10 {
        return Err(OracleError::TooFewCells(config.cells));
    }
    if !(config.cfl > 0.0 && config.cfl <= 1.0) {
        return Err(OracleError::BadCfl(config.cfl));
    }
    if !config.loss_w_per_m.is_finite() {
        return Err(OracleError::BadLoss(config.loss_w_per_m));
    }
    params.validate()?;
    let anchor = config.anchor_pa.unwrap_or(anchor_pa);
    let eos = LinearEos::at(&params.curve, anchor).map_err(|source| OracleError::Thermo {
        vertex: "anchor".into(),
        t_s: 0.0,
        source,
    })?;
    let oracle = Oracle {
        params: params.clone(),
        config: *config,
        eos,
        boilers: params.network.sites().iter().map(|s| s.boiler).collect(),
    };
    let n = params.network.n_sites();
    let state = oracle.state_from(&vec![anchor; n], &vec![0.0; params.network.n_pipes()]);
    Ok((oracle, state))
}

impl Oracle {
    /// Pipes filled with saturated steam, pressure linear between the end
    /// boilers, uniform velocity.
    pub fn state_from(&self, boiler_p: &[f64], velocities: &[f64]) -> OracleState {
        let cells = self.config.cells;
        let pipes = self
            .params
            .network
            .pipes()
            .iter()
            .zip(velocities)
            .map(|(p, u)| {
                let prm = p.params;
                let area = PI * prm.diameter * prm.diameter / 4.0;
                let (pt, ph) = (boiler_p[p.tail], boiler_p[p.head]);
                let at = |x: f64| pt + (ph - pt) * x;
                let mut rho = Vec::with_capacity(cells);
                let mut energy = Vec::with_capacity(cells);
                for i in 0..cells {
                    let pc = at((i as f64 + 0.5) / cells as f64);
                    let (r, h) = self.eos.saturated(pc);
                    rho.push(r);
                    energy.push(r * h - pc);
                }
                let momentum = (0..=cells)
                    .map(|k| self.eos.saturated(at(k as f64 / cells as f64)).0 * u)
                    .collect();
                PipeGrid {
                    cells,
                    dx: prm.length / cells as f64,
                    area,
                    diameter: prm.diameter,
                    friction: prm.friction,
                    q_w: -self.config.loss_w_per_m / area,
                    tail: p.tail,
                    head: p.head,
                    rho,
                    energy,
                    momentum,
                }
            })
            .collect();
        OracleState {
            t_s: 0.0,
            boiler_p: boiler_p.to_vec(),
            pipes,
            mass_in: 0.0,
            energy_in: 0.0,
        }
    }

    pub fn initial_state(&self, init: &InitialCondition) -> Result<OracleState, OracleError> {
        let s = init.resolve(&self.params)?;
        let refs = &self.params.refs;
        Ok(self.state_from(&s.pressures_pa(refs), &s.velocities_mps(refs)))
    }

    /// Largest stable step for `state` (s).
    pub fn cfl_limit(&self, state: &OracleState) -> f64 {
        let mut rate: f64 = 0.0;
        for g in &state.pipes {
            for i in 0..g.cells {
                let u = 0.5 * (g.momentum[i] + g.momentum[i + 1]) / g.rho[i];
                rate = rate.max((u.abs() + self.eos.sound_speed(g.rho[i])) / g.dx);
            }
        }
        self.config.cfl / rate
    }

    fn face_fluxes(&self, g: &PipeGrid, boiler_p: &[f64], fm: &mut [f64], fh: &mut [f64], u: &mut [f64]) {
        let n = g.cells;
        let (rt, ht) = self.eos.saturated(boiler_p[g.tail]);
        let (rh, hh) = self.eos.saturated(boiler_p[g.head]);
        let h_cell = |i: usize| self.eos.enthalpy(g.rho[i], g.energy[i]);
        for k in 0..=n {
            let rho_face = match k {
                0 => 0.5 * (rt + g.rho[0]),
                k if k == n => 0.5 * (g.rho[n - 1] + rh),
                k => 0.5 * (g.rho[k - 1] + g.rho[k]),
            };
            let uk = g.momentum[k] / rho_face;
            u[k] = uk;
            // upwind donor: boiler steam when flowing into the pipe
            let (r, h) = if uk >= 0.0 {
                if k == 0 {
                    (rt, ht)
                } else {
                    (g.rho[k - 1], h_cell(k - 1))
                }
            } else if k == n {
                (rh, hh)
            } else {
                (g.rho[k], h_cell(k))
            };
            fm[k] = r * uk;
            fh[k] = r * uk * h;
        }
    }

    fn boiler_outputs(&self, state: &OracleState, fluxes: &[(Vec<f64>, Vec<f64>)], loads: &[f64]) -> Result<Vec<f64>, OracleError> {
        let mut out = loads.to_vec();
        let h_w: Vec<f64> = state
            .boiler_p
            .iter()
            .enumerate()
            .map(|(v, p)| {
                self.params
                    .curve
                    .sat_props(*p)
                    .map(|s| s.h_w)
                    .map_err(|source| self.thermo_err(v, state.t_s, source))
            })
            .collect::<Result<_, _>>()?;
        for (g, (fm, fh)) in state.pipes.iter().zip(fluxes) {
            let n = g.cells;
            out[g.tail] += g.area * (fh[0] - fm[0] * h_w[g.tail]);
            out[g.head] -= g.area * (fh[n] - fm[n] * h_w[g.head]);
        }
        Ok(out)
    }

    fn thermo_err(&self, v: usize, t_s: f64, source: ThermoError) -> OracleError {
        OracleError::Thermo {
            vertex: self.params.network.sites()[v].id.clone(),
            t_s,
            source,
        }
    }

    /// Boundary velocities and boiler heat outputs of `state`.
    pub fn boundary_report(&self, state: &OracleState) -> Result<BoundaryReport, OracleError> {
        let mut fluxes = Vec::with_capacity(state.pipes.len());
        let mut ends = Vec::new();
        let mut mean = Vec::new();
        for g in &state.pipes {
            let mut fm = vec![0.0; g.cells + 1];
            let mut fh = fm.clone();
            let mut u = fm.clone();
            self.face_fluxes(g, &state.boiler_p, &mut fm, &mut fh, &mut u);
            ends.push((u[0], u[g.cells]));
            mean.push(u.iter().sum::<f64>() / u.len() as f64);
            fluxes.push((fm, fh));
        }
        let loads: Vec<f64> = self.params.loads.iter().map(|l| l.value(state.t_s)).collect();
        Ok(BoundaryReport {
            ends_mps: ends,
            mean_mps: mean,
            heat_outputs_w: self.boiler_outputs(state, &fluxes, &loads)?,
        })
    }
}

/// Advances `state` by `dt` seconds with the inputs in force at its start,
/// splitting into CFL-admissible substeps when needed.
pub fn step_oracle(oracle: &Oracle, state: &mut OracleState, dt: f64) -> Result<(), OracleError> {
    let mut remaining = dt;
    let mut warned = false;
    while remaining > 0.0 {
        let limit = oracle.cfl_limit(state);
        let h = if remaining > limit {
            if !warned && dt > limit * 1.000001 {
                log::warn!("oracle step {dt:.3e} s exceeds the CFL limit {limit:.3e} s; substepping");
                warned = true;
            }
            limit
        } else {
            remaining
        };
        single_step(oracle, state, h)?;
        remaining -= h;
        if remaining < 1e-12 * dt {
            break;
        }
    }
    Ok(())
}

fn single_step(oracle: &Oracle, state: &mut OracleState, dt: f64) -> Result<(), OracleError> {
    let params = &oracle.params;
    let eos = &oracle.eos;
    let t = state.t_s;
    let heat: Vec<f64> = params.heat.iter().map(|s| s.value(t)).collect();
    let loads: Vec<f64> = params.loads.iter().map(|s| s.value(t)).collect();

    let mut fluxes = Vec::with_capacity(state.pipes.len());
    let mut face_u = Vec::with_capacity(state.pipes.len());
    for g in &state.pipes {
        let mut fm = vec![0.0; g.cells + 1];
        let mut fh = fm.clone();
        let mut u = fm.clone();
        oracle.face_fluxes(g, &state.boiler_p, &mut fm, &mut fh, &mut u);
        fluxes.push((fm, fh));
        face_u.push(u);
    }

    // boilers: e(p) dp/dt = Q' − m'_s h_c
    let outputs = oracle.boiler_outputs(state, &fluxes, &loads)?;
    for v in 0..state.boiler_p.len() {
        let e = params
            .curve
            .e_coeff(state.boiler_p[v], &oracle.boilers[v])
            .map_err(|source| oracle.thermo_err(v, t, source))?;
        state.boiler_p[v] += dt * (heat[v] - outputs[v]) / e;
    }

    // cells: mass and energy
    for (pi, (g, (fm, fh))) in state.pipes.iter_mut().zip(&fluxes).enumerate() {
        let n = g.cells;
        let c = dt / g.dx;
        for i in 0..n {
            g.rho[i] -= c * (fm[i + 1] - fm[i]);
            g.energy[i] -= c * (fh[i + 1] - fh[i]);
            g.energy[i] += dt * g.q_w;
            if !(g.rho[i] > 0.0) {
                return Err(OracleError::Density {
                    pipe: params.network.pipes()[pi].id.clone(),
                    cell: i,
                    t_s: t,
                });
            }
        }
        state.mass_in += dt * g.area * (fm[0] - fm[n]);
        state.energy_in += dt * g.area * (fh[0] - fh[n] + g.q_w * g.dx * n as f64);
    }

    // faces: momentum with the updated pressures
    for (g, u) in state.pipes.iter_mut().zip(&face_u) {
        let n = g.cells;
        let p_cell: Vec<f64> = (0..n)
            .map(|i| eos.pressure(g.rho[i], eos.enthalpy(g.rho[i], g.energy[i])))
            .collect();
        let pt = state.boiler_p[g.tail];
        let ph = state.boiler_p[g.head];
        let (rt, _) = eos.saturated(pt);
        let (rh, _) = eos.saturated(ph);
        // convective momentum flux ρu² at cell centres, upwinded
        let conv: Vec<f64> = (0..n)
            .map(|i| {
                let uc = 0.5 * (u[i] + u[i + 1]);
                let m_up = if uc >= 0.0 { g.momentum[i] } else { g.momentum[i + 1] };
                m_up * uc
            })
            .collect();
        let k_f = g.friction / (2.0 * g.diameter);
        for k in 0..=n {
            let (dp, dconv, width, rho_face) = match k {
                0 => (p_cell[0] - pt, conv[0] - g.momentum[0] * u[0], 0.5 * g.dx, 0.5 * (rt + g.rho[0])),
                k if k == n => (
                    ph - p_cell[n - 1],
                    g.momentum[n] * u[n] - conv[n - 1],
                    0.5 * g.dx,
                    0.5 * (g.rho[n - 1] + rh),
                ),
                k => (
                    p_cell[k] - p_cell[k - 1],
                    conv[k] - conv[k - 1],
                    g.dx,
                    0.5 * (g.rho[k - 1] + g.rho[k]),
                ),
            };
            let m_star = g.momentum[k] - dt * (dp + dconv) / width;
            let u_abs = (g.momentum[k] / rho_face).abs();
            g.momentum[k] = m_star / (1.0 + dt * k_f * u_abs);
        }
    }
    state.t_s += dt;
    Ok(())
}

/// Runs the oracle over the scenario and samples it like [`crate::simulate::integrate`].
pub fn integrate_oracle(oracle: &Oracle, scenario: &Scenario) -> Result<TimeSeries, OracleError> {
    scenario.validate()?;
    let mut oracle = oracle.clone();
    oracle.params = scenario.apply(&oracle.params)?;
    let mut state = oracle.initial_state(&scenario.initial)?;
    state.t_s = scenario.t_start_s;
    let bps = oracle.params.breakpoints(scenario.t_start_s, scenario.t_end_s);
    let samples = scenario.sample_times(&bps);
    let params = &oracle.params;
    let mut ts = TimeSeries {
        vertex_ids: params.network.sites().iter().map(|s| s.id.clone()).collect(),
        link_ids: params.network.pipes().iter().map(|p| p.id.clone()).collect(),
        pipe_ends_mps: Some(Vec::new()),
        ..TimeSeries::default()
    };
    let mut steps = 0usize;
    for &target in &samples {
        while target - state.t_s > 1e-12 * target.abs().max(1.0) {
            let dt = oracle.cfl_limit(&state).min(target - state.t_s);
            single_step(&oracle, &mut state, dt)?;
            steps += 1;
        }
        state.t_s = target;
        record(&oracle, &state, &mut ts)?;
    }
    ts.stats = SolverStats {
        segments: bps.len() + 1,
        ode: crate::ode::OdeStats {
            accepted: steps,
            rejected: 0,
            rhs_evals: steps,
        },
    };
    Ok(ts)
}

fn record(oracle: &Oracle, state: &OracleState, ts: &mut TimeSeries) -> Result<(), OracleError> {
    let rep = oracle.boundary_report(state)?;
    let refs = &oracle.params.refs;
    let eps = oracle.params.epsilon;
    let validity = oracle
        .params
        .network
        .pipes()
        .iter()
        .map(|p| (state.boiler_p[p.tail] - state.boiler_p[p.head]).abs() / refs.pressure)
        .fold(0.0, f64::max)
        / eps;
    ts.t_s.push(state.t_s);
    ts.pressures_pa.push(state.boiler_p.clone());
    ts.velocities_mps.push(rep.mean_mps);
    if let Some(e) = ts.pipe_ends_mps.as_mut() {
        e.push(rep.ends_mps);
    }
    ts.heat_outputs_w.push(rep.heat_outputs_w);
    ts.validity_ratio.push(validity);
    Ok(())
}

/// Runs the same scenario for several heat-loss levels (W/m), concurrently
/// when `exec` allows.
pub fn loss_sweep(
    params: &SystemParams,
    scenario: &Scenario,
    config: &OracleConfig,
    losses: &[f64],
    exec: Execution,
) -> Result<Vec<TimeSeries>, OracleError> {
    let anchor = anchor_for(params, scenario)?;
    par::map(exec, losses, |loss| {
        let cfg = OracleConfig {
            loss_w_per_m: *loss,
            ..*config
        };
        let (oracle, _) = build_oracle(params, &cfg, anchor)?;
        integrate_oracle(&oracle, scenario)
    })
    .into_iter()
    .collect()
}

/// Mean initial boiler pressure of the scenario: the default EOS anchor.
pub fn anchor_for(params: &SystemParams, scenario: &Scenario) -> Result<f64, OracleError> {
    let s = scenario.initial.resolve(params)?;
    let p = s.pressures_pa(&params.refs);
    Ok(p.iter().sum::<f64>() / p.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareTolerance {
    /// Relative to the lumped velocity's sup-norm over the window.
    pub velocity_rel: f64,
    /// Relative to the pointwise absolute pressure.
    pub pressure_rel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantityError {
    pub name: String,
    pub sup_rel: f64,
    pub rms_rel: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub window_s: (f64, f64),
    pub quantities: Vec<QuantityError>,
    pub pass: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("series describe different networks")]
    Mismatch,
    #[error("window [{0}, {1}] s is not covered by both series")]
    Window(f64, f64),
}

fn interp(t: &[f64], y: &[f64], at: f64) -> f64 {
    let k = t.partition_point(|x| *x <= at);
    if k == 0 {
        return y[0];
    }
    if k == t.len() {
        return y[k - 1];
    }
    let w = (at - t[k - 1]) / (t[k] - t[k - 1]);
    y[k - 1] + w * (y[k] - y[k - 1])
}

/// Sup-norm and RMS relative discrepancies between a lumped series and an
/// oracle series over `window_s`, evaluated at the lumped sample times.
///
/// Pipe-end velocities of the oracle (when present) are both compared with
/// the lumped single velocity.
pub fn compare_models(
    lumped: &TimeSeries,
    oracle: &TimeSeries,
    window_s: (f64, f64),
    tol: &CompareTolerance,
) -> Result<ComparisonReport, CompareError> {
    if lumped.vertex_ids != oracle.vertex_ids || lumped.link_ids != oracle.link_ids {
        return Err(CompareError::Mismatch);
    }
    let covers = |ts: &TimeSeries| {
        !ts.is_empty() && ts.t_s[0] <= window_s.0 + 1e-9 && *ts.t_s.last().unwrap() >= window_s.1 - 1e-9
    };
    if window_s.1 < window_s.0 || !covers(lumped) || !covers(oracle) {
        return Err(CompareError::Window(window_s.0, window_s.1));
    }
    let idx: Vec<usize> = (0..lumped.len())
        .filter(|&i| lumped.t_s[i] >= window_s.0 - 1e-9 && lumped.t_s[i] <= window_s.1 + 1e-9)
        .collect();
    let stats = |name: String, errs: Vec<f64>, tolerance: f64| {
        let sup = errs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len().max(1) as f64).sqrt();
        QuantityError {
            name,
            sup_rel: sup,
            rms_rel: rms,
            tolerance,
            pass: sup <= tolerance,
        }
    };
    let mut out = Vec::new();
    for (v, id) in lumped.vertex_ids.iter().enumerate() {
        let po = oracle.pressure(v);
        let errs = idx
            .iter()
            .map(|&i| {
                let o = interp(&oracle.t_s, &po, lumped.t_s[i]);
                (lumped.pressures_pa[i][v] - o) / o
            })
            .collect();
        out.push(stats(format!("p_{id}"), errs, tol.pressure_rel));
    }
    for (l, id) in lumped.link_ids.iter().enumerate() {
        let ul = lumped.velocity(l);
        let scale = idx.iter().fold(0.0f64, |a, &i| a.max(ul[i].abs())).max(f64::MIN_POSITIVE);
        let series: Vec<(String, Vec<f64>)> = match &oracle.pipe_ends_mps {
            Some(ends) => vec![
                (format!("u0_{id}"), ends.iter().map(|r| r[l].0).collect()),
                (format!("uL_{id}"), ends.iter().map(|r| r[l].1).collect()),
            ],
            None => vec![(format!("u_{id}"), oracle.velocity(l))],
        };
        for (name, uo) in series {
            let errs = idx
                .iter()
                .map(|&i| (ul[i] - interp(&oracle.t_s, &uo, lumped.t_s[i])) / scale)
                .collect();
            out.push(stats(name, errs, tol.velocity_rel));
        }
    }
    Ok(ComparisonReport {
        window_s,
        pass: out.iter().all(|q| q.pass),
        quantities: out,
    })
}
