//! Scenario-driven integration of the full and inner-limit models.
//!
//! Inputs are piecewise constant between schedule breakpoints; each constant
//! stretch is integrated as its own segment so no step straddles a jump.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inner_limit::{build_inner, rhs_inner};
use crate::lumped::{FullModel, ModelError, Schedule, SystemParams, SystemState};
use crate::ode::{dopri5, OdeError, OdeOptions, OdeStats};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step_s: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// All vertices at one pressure, all pipes at rest.
    Uniform { pressure_pa: f64 },
    Explicit {
        pressures_pa: Vec<f64>,
        velocities_mps: Vec<f64>,
    },
}

impl InitialCondition {
    pub fn resolve(&self, params: &SystemParams) -> Result<SystemState, ScenarioError> {
        let n = params.network.n_sites();
        let m = params.network.n_pipes();
        let state = match self {
            InitialCondition::Uniform { pressure_pa } => {
                SystemState::uniform(pressure_pa / params.refs.pressure, n, m)
            }
            InitialCondition::Explicit {
                pressures_pa,
                velocities_mps,
            } => {
                if pressures_pa.len() != n || velocities_mps.len() != m {
                    return Err(ScenarioError::InitialSize {
                        n,
                        m,
                        got_p: pressures_pa.len(),
                        got_u: velocities_mps.len(),
                    });
                }
                SystemState::from_dimensional(pressures_pa, velocities_mps, &params.refs)
            }
        };
        if !state.is_finite() {
            return Err(ScenarioError::NonFinite);
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Heat input per vertex (W).
    pub heat: Vec<Schedule>,
    /// Load per vertex (W).
    pub loads: Vec<Schedule>,
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub sample_interval_s: f64,
    pub initial: InitialCondition,
    #[serde(default)]
    pub solver: SolverOptions,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("time span must satisfy t_end >= t_start (got {0} .. {1})")]
    BadSpan(f64, f64),
    #[error("sample interval must be positive, got {0}")]
    BadSampleInterval(f64),
    #[error("initial state needs {n} pressures and {m} velocities, got {got_p} and {got_u}")]
    InitialSize {
        n: usize,
        m: usize,
        got_p: usize,
        got_u: usize,
    },
    #[error("initial state is not finite")]
    NonFinite,
    #[error("solver tolerances must be positive")]
    BadTolerance,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.t_end_s >= self.t_start_s) || !self.t_start_s.is_finite() || !self.t_end_s.is_finite() {
            return Err(ScenarioError::BadSpan(self.t_start_s, self.t_end_s));
        }
        if !(self.sample_interval_s > 0.0) {
            return Err(ScenarioError::BadSampleInterval(self.sample_interval_s));
        }
        let s = &self.solver;
        if !(s.rtol > 0.0 && s.atol > 0.0) || s.max_step_s.is_some_and(|h| !(h > 0.0)) {
            return Err(ScenarioError::BadTolerance);
        }
        Ok(())
    }

    /// `params` with this scenario's schedules installed.
    pub fn apply(&self, params: &SystemParams) -> Result<SystemParams, ModelError> {
        params.clone().with_schedules(self.heat.clone(), self.loads.clone())
    }

    /// Sample times: the regular grid, every breakpoint and the end point.
    pub fn sample_times(&self, breakpoints: &[f64]) -> Vec<f64> {
        let span = self.t_end_s - self.t_start_s;
        let count = (span / self.sample_interval_s + 1e-9).floor() as usize;
        let mut t: Vec<f64> = (0..=count)
            .map(|k| self.t_start_s + k as f64 * self.sample_interval_s)
            .chain(breakpoints.iter().copied())
            .chain(std::iter::once(self.t_end_s))
            .collect();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        t.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
        t
    }
}

/// Heat inputs `(Q'_1, Q'_2)` before/after a step, with common loads.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSpec {
    pub before_w: Vec<f64>,
    pub after_w: Vec<f64>,
    pub step_time_s: f64,
    pub load_w: f64,
    pub t_end_s: f64,
    pub pressure_pa: f64,
    pub sample_interval_s: f64,
}

impl Default for StepSpec {
    fn default() -> Self {
        Self {
            before_w: vec![5e6, 5e6],
            after_w: vec![6e6, 4e6],
            step_time_s: 10.0,
            load_w: 5e6,
            t_end_s: 100.0,
            pressure_pa: 800e3,
            sample_interval_s: 0.1,
        }
    }
}

pub fn make_step_scenario(spec: &StepSpec) -> Scenario {
    Scenario {
        heat: spec
            .before_w
            .iter()
            .zip(&spec.after_w)
            .map(|(b, a)| Schedule::step(*b, spec.step_time_s, *a))
            .collect(),
        loads: vec![Schedule::constant(spec.load_w); spec.before_w.len()],
        t_start_s: 0.0,
        t_end_s: spec.t_end_s,
        sample_interval_s: spec.sample_interval_s,
        initial: InitialCondition::Uniform {
            pressure_pa: spec.pressure_pa,
        },
        solver: SolverOptions::default(),
    }
}

/// Square-wave heat input at vertex 0, constant elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpec {
    pub high_w: f64,
    pub low_w: f64,
    pub period_s: f64,
    pub duty: f64,
    pub others_w: Vec<f64>,
    pub load_w: f64,
    pub t_end_s: f64,
    pub pressure_pa: f64,
    pub sample_interval_s: f64,
}

impl Default for PeriodicSpec {
    fn default() -> Self {
        Self {
            high_w: 7e6,
            low_w: 5e6,
            period_s: 600.0,
            duty: 0.5,
            others_w: vec![4e6],
            load_w: 5e6,
            t_end_s: 1800.0,
            pressure_pa: 800e3,
            sample_interval_s: 0.5,
        }
    }
}

pub fn make_periodic_scenario(spec: &PeriodicSpec) -> Scenario {
    let mut heat = vec![Schedule::Square {
        period: spec.period_s,
        high: spec.high_w,
        low: spec.low_w,
        duty: spec.duty,
        start: 0.0,
    }];
    heat.extend(spec.others_w.iter().map(|q| Schedule::constant(*q)));
    Scenario {
        loads: vec![Schedule::constant(spec.load_w); heat.len()],
        heat,
        t_start_s: 0.0,
        t_end_s: spec.t_end_s,
        sample_interval_s: spec.sample_interval_s,
        initial: InitialCondition::Uniform {
            pressure_pa: spec.pressure_pa,
        },
        solver: SolverOptions::default(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Full,
    InnerLimit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub ode: OdeStats,
    pub segments: usize,
}

/// Sampled trajectory in SI units; one row per sample time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub vertex_ids: Vec<String>,
    pub link_ids: Vec<String>,
    pub t_s: Vec<f64>,
    pub pressures_pa: Vec<Vec<f64>>,
    pub velocities_mps: Vec<Vec<f64>>,
    /// Pipe-end velocities `(u(0), u(L))`; present for the PDE oracle only.
    pub pipe_ends_mps: Option<Vec<Vec<(f64, f64)>>>,
    /// `Q'_o,v = m'_s,v h_c(p_v)`; filled by [`derived_outputs`].
    pub heat_outputs_w: Vec<Vec<f64>>,
    /// `max_l |p_tail - p_head| / ε`; filled by [`derived_outputs`].
    pub validity_ratio: Vec<f64>,
    pub stats: SolverStats,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_s.is_empty()
    }

    pub fn pressure(&self, v: usize) -> Vec<f64> {
        self.pressures_pa.iter().map(|r| r[v]).collect()
    }

    pub fn velocity(&self, l: usize) -> Vec<f64> {
        self.velocities_mps.iter().map(|r| r[l]).collect()
    }

    pub fn heat_output(&self, v: usize) -> Vec<f64> {
        self.heat_outputs_w.iter().map(|r| r[v]).collect()
    }

    pub fn mean_pressure(&self) -> Vec<f64> {
        self.pressures_pa
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }

    /// Index of the last sample with `t ≤ t_s`.
    pub fn index_at(&self, t_s: f64) -> Option<usize> {
        self.t_s.partition_point(|t| *t <= t_s + 1e-9).checked_sub(1)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t_s".to_string()];
        h.extend(self.vertex_ids.iter().map(|v| format!("p_{v}_Pa")));
        h.extend(self.link_ids.iter().map(|l| format!("u_{l}_mps")));
        if self.pipe_ends_mps.is_some() {
            for l in &self.link_ids {
                h.push(format!("u0_{l}_mps"));
                h.push(format!("uL_{l}_mps"));
            }
        }
        if !self.heat_outputs_w.is_empty() {
            h.extend(self.vertex_ids.iter().map(|v| format!("Qo_{v}_W")));
        }
        if !self.validity_ratio.is_empty() {
            h.push("validity_ratio".into());
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for i in 0..self.len() {
            let mut row = vec![self.t_s[i]];
            row.extend(&self.pressures_pa[i]);
            row.extend(&self.velocities_mps[i]);
            if let Some(ends) = &self.pipe_ends_mps {
                for (a, b) in &ends[i] {
                    row.push(*a);
                    row.push(*b);
                }
            }
            if let Some(q) = self.heat_outputs_w.get(i) {
                row.extend(q);
            }
            if let Some(v) = self.validity_ratio.get(i) {
                row.push(*v);
            }
            w.write_record(row.iter().map(|x| format!("{x:.9e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("at t = {t_s:.6} s: {source}")]
    AtTime {
        t_s: f64,
        #[source]
        source: ModelError,
    },
    #[error(
        "step size underflow at t = {t_s:.6} s (h = {h_s:.3e} s): the problem is too stiff \
         for the explicit solver; use a larger epsilon or looser tolerances"
    )]
    Stiff { t_s: f64, h_s: f64 },
}

fn map_ode(e: OdeError<ModelError>, t_r: f64) -> SimError {
    match e {
        OdeError::StepUnderflow { t, h } => SimError::Stiff {
            t_s: t * t_r,
            h_s: h * t_r,
        },
        OdeError::Rhs { t, source } => SimError::AtTime { t_s: t * t_r, source },
    }
}

/// Integrates the chosen model over the scenario. The result already carries
/// the derived heat outputs and validity ratio.
pub fn integrate(kind: ModelKind, scenario: &Scenario, params: &SystemParams) -> Result<TimeSeries, SimError> {
    scenario.validate()?;
    let params = scenario.apply(params)?;
    let init = scenario.initial.resolve(&params)?;
    let refs = params.refs;
    let t_r = refs.time();
    let (t0, t1) = (scenario.t_start_s, scenario.t_end_s);
    let bps = params.breakpoints(t0, t1);
    let samples_s = scenario.sample_times(&bps);
    let samples: Vec<f64> = samples_s.iter().map(|t| t / t_r).collect();
    let opts = OdeOptions {
        rtol: scenario.solver.rtol,
        atol: scenario.solver.atol,
        max_step: scenario.solver.max_step_s.map_or(f64::INFINITY, |h| h / t_r),
        ..OdeOptions::default()
    };
    let n = params.network.n_sites();
    let model = FullModel::new(&params);
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::with_capacity(samples.len());
    let mut stats = SolverStats::default();

    let edges: Vec<f64> = std::iter::once(t0).chain(bps.iter().copied()).chain(std::iter::once(t1)).collect();

    match kind {
        ModelKind::Full => {
            let mut y = init.to_vec();
            for (i, w) in edges.windows(2).enumerate() {
                let (a, b) = (w[0] / t_r, w[1] / t_r);
                let sources = params.net_sources(w[0]);
                let seg_samples = segment_samples(&samples, a, b, i + 2 == edges.len());
                y = dopri5(
                    |_, y, dy| model.rhs(y, &sources, dy),
                    a,
                    &y,
                    b,
                    &opts,
                    seg_samples,
                    |t, y| rows.push((t, y.to_vec())),
                    &mut stats.ode,
                )
                .map_err(|e| map_ode(e, t_r))?;
                stats.segments += 1;
            }
        }
        ModelKind::InnerLimit => {
            let eps = params.epsilon;
            let p0 = init.p.iter().sum::<f64>() / n as f64;
            let mut sys = build_inner(&params, p0, t0)?;
            let mut y: Vec<f64> = init
                .p
                .iter()
                .map(|p| (p - p0) / eps)
                .chain(init.u.iter().enumerate().map(|(l, u)| u * sys.area[l]))
                .collect();
            let to_state = |y: &[f64], area: &[f64]| -> Vec<f64> {
                y[..n]
                    .iter()
                    .map(|psi| p0 + eps * psi)
                    .chain(y[n..].iter().zip(area).map(|(q, a)| q / a))
                    .collect()
            };
            for (i, w) in edges.windows(2).enumerate() {
                let (a, b) = (w[0] / t_r, w[1] / t_r);
                sys.set_sources(&params.net_sources(w[0]));
                let seg_samples = segment_samples(&samples, a, b, i + 2 == edges.len());
                let sys_ref = &sys;
                y = dopri5(
                    |_, y, dy| -> Result<(), ModelError> {
                        let (dpsi, dq) = rhs_inner(&y[..n], &y[n..], sys_ref);
                        dy[..n].copy_from_slice(&dpsi);
                        dy[n..].copy_from_slice(&dq);
                        Ok(())
                    },
                    a,
                    &y,
                    b,
                    &opts,
                    seg_samples,
                    |t, y| rows.push((t, to_state(y, &sys_ref.area))),
                    &mut stats.ode,
                )
                .map_err(|e| map_ode(e, t_r))?;
                stats.segments += 1;
            }
        }
    }

    let ts = TimeSeries {
        vertex_ids: params.network.sites().iter().map(|s| s.id.clone()).collect(),
        link_ids: params.network.pipes().iter().map(|p| p.id.clone()).collect(),
        t_s: rows.iter().map(|(t, _)| t * t_r).collect(),
        pressures_pa: rows.iter().map(|(_, y)| y[..n].iter().map(|p| p * refs.pressure).collect()).collect(),
        velocities_mps: rows.iter().map(|(_, y)| y[n..].iter().map(|u| u * refs.velocity).collect()).collect(),
        stats,
        ..TimeSeries::default()
    };
    // exact sample times, free of the s → dimensionless → s round trip
    let mut ts = ts;
    let k = ts.t_s.len();
    ts.t_s.copy_from_slice(&samples_s[..k]);
    derived_outputs(ts, &params)
}

/// Full-model and inner-limit runs of one scenario for each `ε`.
pub fn epsilon_sweep(
    scenario: &Scenario,
    params: &SystemParams,
    epsilons: &[f64],
    exec: Execution,
) -> Result<Vec<(TimeSeries, TimeSeries)>, SimError> {
    par::map(exec, epsilons, |eps| {
        let p = params.clone().with_epsilon(*eps)?;
        Ok((
            integrate(ModelKind::Full, scenario, &p)?,
            integrate(ModelKind::InnerLimit, scenario, &p)?,
        ))
    })
    .into_iter()
    .collect()
}

/// Samples in `[a, b)`, or `[a, b]` for the final segment.
fn segment_samples(samples: &[f64], a: f64, b: f64, last: bool) -> &[f64] {
    let tol = 1e-12 * b.abs().max(1.0);
    let lo = samples.partition_point(|s| *s < a - tol);
    let hi = if last {
        samples.partition_point(|s| *s <= b + tol)
    } else {
        samples.partition_point(|s| *s < b - tol)
    };
    &samples[lo..hi]
}

/// Adds heat outputs `Q'_o,v = Q'_{Lv} + Σ_out A h_c ρ_s u − Σ_in A h_c ρ_s u`
/// (steam leaving boiler `v` times `h_c`) and the validity ratio.
pub fn derived_outputs(mut ts: TimeSeries, params: &SystemParams) -> Result<TimeSeries, SimError> {
    let model = FullModel::new(params);
    let refs = &params.refs;
    let qr = refs.heat_flow();
    ts.heat_outputs_w.clear();
    ts.validity_ratio.clear();
    for i in 0..ts.len() {
        let y = SystemState::from_dimensional(&ts.pressures_pa[i], &ts.velocities_mps[i], refs).to_vec();
        let loads = params.loads_at(ts.t_s[i]);
        let qo = model
            .heat_outputs(&y, &loads)
            .map_err(|source| SimError::AtTime { t_s: ts.t_s[i], source })?;
        ts.heat_outputs_w.push(qo.iter().map(|q| q * qr).collect());
        ts.validity_ratio.push(model.validity_ratio(&y));
    }
    Ok(ts)
}
