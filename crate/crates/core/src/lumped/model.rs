use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use super::scaling::ReferenceQuantities;
use super::schedule::{Schedule, ScheduleError};
use crate::network::{Network, NetworkError};
use crate::thermo::{SaturationCurve, ThermoError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("pressure at vertex {vertex} left the saturation table: {source}")]
    PressureOutOfRange {
        vertex: String,
        #[source]
        source: ThermoError,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("schedule for vertex {vertex}: {source}")]
    Schedule {
        vertex: String,
        #[source]
        source: ScheduleError,
    },
    #[error("expected {expected} {what} schedules, got {got}")]
    ScheduleCount {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid reference quantities")]
    BadReferences,
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
}

/// Everything the model equations need besides the state.
#[derive(Debug, Clone)]
pub struct SystemParams {
    pub network: Network,
    pub curve: Arc<SaturationCurve>,
    pub refs: ReferenceQuantities,
    /// Heat input `Q'_v(t)` per vertex (W, t in s).
    pub heat: Vec<Schedule>,
    /// Heat consumption `Q'_{Lv}(t)` per vertex (W, t in s).
    pub loads: Vec<Schedule>,
    /// Small parameter of the momentum/boiler coupling. Defaults to `ε₂`.
    pub epsilon: f64,
}

impl SystemParams {
    pub fn new(
        network: Network,
        curve: Arc<SaturationCurve>,
        refs: ReferenceQuantities,
        heat: Vec<Schedule>,
        loads: Vec<Schedule>,
    ) -> Result<Self, ModelError> {
        let epsilon = refs.eps2();
        let params = Self {
            network,
            curve,
            refs,
            heat,
            loads,
            epsilon,
        };
        params.validate()?;
        Ok(params)
    }

    /// Two-site network with the tabulated parameters, constant 5 MJ/s inputs
    /// and loads.
    pub fn two_site_default() -> Self {
        Self::new(
            Network::two_site(),
            Arc::new(SaturationCurve::standard()),
            ReferenceQuantities::table_default(),
            vec![Schedule::constant(5.0e6); 2],
            vec![Schedule::constant(5.0e6); 2],
        )
        .expect("default two-site parameters are valid")
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self, ModelError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ModelError::BadEpsilon(epsilon));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_schedules(mut self, heat: Vec<Schedule>, loads: Vec<Schedule>) -> Result<Self, ModelError> {
        self.heat = heat;
        self.loads = loads;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.network.validate()?;
        if !self.refs.is_valid() {
            return Err(ModelError::BadReferences);
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ModelError::BadEpsilon(self.epsilon));
        }
        let n = self.network.n_sites();
        for (what, list) in [("heat", &self.heat), ("load", &self.loads)] {
            if list.len() != n {
                return Err(ModelError::ScheduleCount {
                    what,
                    expected: n,
                    got: list.len(),
                });
            }
            for (s, site) in list.iter().zip(self.network.sites()) {
                s.validate().map_err(|source| ModelError::Schedule {
                    vertex: site.id.clone(),
                    source,
                })?;
            }
        }
        Ok(())
    }

    /// Dimensionless net source `(Q'_v - Q'_{Lv}) / Q'_r` at time `t_s` (s).
    pub fn net_sources(&self, t_s: f64) -> Vec<f64> {
        let qr = self.refs.heat_flow();
        self.heat
            .iter()
            .zip(&self.loads)
            .map(|(h, l)| (h.value(t_s) - l.value(t_s)) / qr)
            .collect()
    }

    /// Dimensionless loads `Q'_{Lv} / Q'_r` at time `t_s` (s).
    pub fn loads_at(&self, t_s: f64) -> Vec<f64> {
        let qr = self.refs.heat_flow();
        self.loads.iter().map(|l| l.value(t_s) / qr).collect()
    }

    /// Input discontinuities strictly inside `(t0, t1)` (s).
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        super::schedule::merged_breakpoints(self.heat.iter().chain(&self.loads), t0, t1)
    }
}

/// Dimensionless model state: pressure per vertex, velocity per link.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub p: Vec<f64>,
    pub u: Vec<f64>,
}

impl SystemState {
    pub fn uniform(p: f64, n: usize, m: usize) -> Self {
        Self {
            p: vec![p; n],
            u: vec![0.0; m],
        }
    }

    pub fn from_dimensional(p_pa: &[f64], u_mps: &[f64], refs: &ReferenceQuantities) -> Self {
        Self {
            p: p_pa.iter().map(|p| p / refs.pressure).collect(),
            u: u_mps.iter().map(|u| u / refs.velocity).collect(),
        }
    }

    pub fn pressures_pa(&self, refs: &ReferenceQuantities) -> Vec<f64> {
        self.p.iter().map(|p| p * refs.pressure).collect()
    }

    pub fn velocities_mps(&self, refs: &ReferenceQuantities) -> Vec<f64> {
        self.u.iter().map(|u| u * refs.velocity).collect()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.p.iter().chain(&self.u).copied().collect()
    }

    pub fn from_slice(y: &[f64], n: usize) -> Self {
        Self {
            p: y[..n].to_vec(),
            u: y[n..].to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(&self.u).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy)]
struct LinkConst {
    tail: usize,
    head: usize,
    /// `π d² / 4`
    area: f64,
    length: f64,
    /// `λ / (2 d)`
    friction: f64,
}

/// The dimensionless lumped model, with per-link constants precomputed.
#[derive(Debug, Clone)]
pub struct FullModel<'a> {
    pub params: &'a SystemParams,
    links: Vec<LinkConst>,
}

/// Per-vertex thermodynamic quantities used by the right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct VertexThermo {
    /// Dimensionless `e(p)`.
    pub e: f64,
    /// Dimensionless `h_c(p) ρ_s(p)`.
    pub transport: f64,
    /// Dimensionless `ρ_s(p)`.
    pub rho_s: f64,
}

impl<'a> FullModel<'a> {
    pub fn new(params: &'a SystemParams) -> Self {
        let refs = &params.refs;
        let links = params
            .network
            .pipes()
            .iter()
            .map(|p| {
                let d = p.params.diameter / refs.diameter;
                let lam = p.params.friction / refs.friction();
                LinkConst {
                    tail: p.tail,
                    head: p.head,
                    area: PI * d * d / 4.0,
                    length: p.params.length / refs.length,
                    friction: lam / (2.0 * d),
                }
            })
            .collect();
        Self { params, links }
    }

    pub fn n(&self) -> usize {
        self.params.network.n_sites()
    }

    pub fn m(&self) -> usize {
        self.links.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    /// Thermodynamic quantities at dimensionless pressure `p` for vertex `v`.
    pub fn vertex_thermo(&self, v: usize, p: f64) -> Result<VertexThermo, ModelError> {
        let refs = &self.params.refs;
        let site = &self.params.network.sites()[v];
        let s = self
            .params
            .curve
            .sat_props(p * refs.pressure)
            .map_err(|source| ModelError::PressureOutOfRange {
                vertex: site.id.clone(),
                source,
            })?;
        let e = crate::thermo::energy_terms_at(&s, &site.boiler).total() / refs.energy_coeff();
        let rho_s = s.rho_s / refs.density;
        Ok(VertexThermo {
            e,
            transport: s.h_c() / refs.enthalpy() * rho_s,
            rho_s,
        })
    }

    /// Right-hand side for state `y = [p; u]` with constant dimensionless net
    /// sources `Q'_v - Q'_{Lv}`.
    pub fn rhs(&self, y: &[f64], sources: &[f64], dy: &mut [f64]) -> Result<(), ModelError> {
        let n = self.n();
        let eps = self.epsilon();
        let thermo: Vec<VertexThermo> = (0..n)
            .map(|v| self.vertex_thermo(v, y[v]))
            .collect::<Result<_, _>>()?;
        dy[..n].copy_from_slice(sources);
        for (j, l) in self.links.iter().enumerate() {
            let u = y[n + j];
            dy[l.tail] -= l.area * thermo[l.tail].transport * u;
            dy[l.head] += l.area * thermo[l.head].transport * u;
            let rho_sum = thermo[l.tail].rho_s + thermo[l.head].rho_s;
            dy[n + j] = 2.0 * (y[l.tail] - y[l.head]) / (eps * l.length * rho_sum)
                - l.friction * u * u.abs();
        }
        for v in 0..n {
            dy[v] *= eps / thermo[v].e;
        }
        Ok(())
    }

    /// Friction contribution `-(λ/2d) u|u|` to `du_l/dt`.
    pub fn friction_term(&self, link: usize, u: f64) -> f64 {
        -self.links[link].friction * u * u.abs()
    }

    /// Dimensionless heat output rates `Q'_{o,v} = m'_{s,v} h_c(p_v)`.
    pub fn heat_outputs(&self, y: &[f64], loads: &[f64]) -> Result<Vec<f64>, ModelError> {
        let n = self.n();
        let mut out = loads.to_vec();
        for (j, l) in self.links.iter().enumerate() {
            let u = y[n + j];
            out[l.tail] += l.area * self.vertex_thermo(l.tail, y[l.tail])?.transport * u;
            out[l.head] -= l.area * self.vertex_thermo(l.head, y[l.head])?.transport * u;
        }
        Ok(out)
    }

    /// `max_l |p_tail - p_head| / ε`; the model is trustworthy while O(1).
    pub fn validity_ratio(&self, y: &[f64]) -> f64 {
        self.links
            .iter()
            .map(|l| (y[l.tail] - y[l.head]).abs())
            .fold(0.0, f64::max)
            / self.epsilon()
    }

    /// Pipe area `π d²/4` in dimensionless units.
    pub fn link_area(&self, link: usize) -> f64 {
        self.links[link].area
    }
}

/// Convenience wrapper: `d(state)/dt` of the full model at time `t_s` (s).
pub fn rhs_full(state: &SystemState, t_s: f64, params: &SystemParams) -> Result<SystemState, ModelError> {
    let model = FullModel::new(params);
    let y = state.to_vec();
    let mut dy = vec![0.0; y.len()];
    model.rhs(&y, &params.net_sources(t_s), &mut dy)?;
    Ok(SystemState::from_slice(&dy, model.n()))
}
