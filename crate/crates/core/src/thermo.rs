//! Saturated-steam properties along the saturation line and the boiler
//! energy coefficient `e(p)`.
//!
//! Properties come from an embedded table of the saturation line
//! (IAPWS-IF97 values, 64 log-spaced pressures over 0.03-2 MPa). Each
//! property is interpolated by a not-a-knot cubic spline in `ln p`; the
//! pressure derivatives are the analytic derivatives of that spline, so they
//! are continuous across knots and consistent with the interpolated values.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower end of the supported pressure range (Pa).
pub const P_MIN: f64 = 3.0e4;
/// Upper end of the supported pressure range (Pa).
pub const P_MAX: f64 = 2.0e6;

const EMBEDDED_TABLE: &str = include_str!("../data/saturation.csv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermoError {
    #[error("pressure {p} Pa is below the lower bound {min} Pa of the saturation table")]
    BelowRange { p: f64, min: f64 },
    #[error("pressure {p} Pa is above the upper bound {max} Pa of the saturation table")]
    AboveRange { p: f64, max: f64 },
    #[error("pressure is not finite: {0}")]
    NonFinite(f64),
    #[error("invalid saturation table: {0}")]
    InvalidTable(String),
}

/// Saturated steam and water state at one pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaturationPoint {
    /// Pressure (Pa).
    pub p: f64,
    /// Saturation temperature (K).
    pub t_s: f64,
    /// Saturated steam density (kg/m³).
    pub rho_s: f64,
    /// Saturated water density (kg/m³).
    pub rho_w: f64,
    /// Saturated steam specific enthalpy (J/kg).
    pub h_s: f64,
    /// Saturated water specific enthalpy (J/kg).
    pub h_w: f64,
    pub d_rho_s_dp: f64,
    pub d_rho_w_dp: f64,
    pub d_h_s_dp: f64,
    pub d_h_w_dp: f64,
    pub d_t_s_dp: f64,
}

impl SaturationPoint {
    /// Enthalpy of condensation `h_s - h_w` (J/kg).
    pub fn h_c(&self) -> f64 {
        self.h_s - self.h_w
    }
}

/// Lumped boiler parameters (drum plus evaporator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoilerParams {
    /// Total steam volume (m³).
    pub steam_volume: f64,
    /// Total water volume (m³).
    pub water_volume: f64,
    /// Metal mass of drum and evaporator (kg).
    pub metal_mass: f64,
    /// Specific heat of the metal (J/(K·kg)).
    pub metal_specific_heat: f64,
}

impl BoilerParams {
    /// The boiler used in the two-site experiments: 10 m³ steam, 10 m³
    /// water, 50 t of metal at 0.4 kJ/(K·kg).
    pub fn table_default() -> Self {
        Self {
            steam_volume: 10.0,
            water_volume: 10.0,
            metal_mass: 50_000.0,
            metal_specific_heat: 400.0,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        [
            self.steam_volume,
            self.water_volume,
            self.metal_mass,
            self.metal_specific_heat,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// The five contributions to `e(p)` (J/Pa).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyTerms {
    /// `h_c · V_s · ∂ρ_s/∂p`
    pub latent: f64,
    /// `ρ_s · V_s · ∂h_s/∂p`
    pub steam_enthalpy: f64,
    /// `ρ_w · V_w · ∂h_w/∂p`
    pub water_enthalpy: f64,
    /// `m_t · C_p · ∂T_s/∂p`
    pub metal: f64,
    /// `-V_s - V_w`
    pub volume: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.latent + self.steam_enthalpy + self.water_enthalpy + self.metal + self.volume
    }
}

/// Not-a-knot cubic spline through `(x_i, y_i)`.
#[derive(Debug, Clone)]
struct Spline {
    y: Vec<f64>,
    second: Vec<f64>,
}

impl Spline {
    fn fit(x: &[f64], y: &[f64]) -> Result<Self, ThermoError> {
        let n = x.len();
        if n < 4 {
            return Err(ThermoError::InvalidTable(
                "need at least four knots".to_string(),
            ));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        // not-a-knot: third derivative continuous at x_1 and x_{n-2}
        a[(0, 0)] = h[1];
        a[(0, 1)] = -(h[0] + h[1]);
        a[(0, 2)] = h[0];
        for i in 1..n - 1 {
            a[(i, i - 1)] = h[i - 1];
            a[(i, i)] = 2.0 * (h[i - 1] + h[i]);
            a[(i, i + 1)] = h[i];
            b[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        a[(n - 1, n - 3)] = h[n - 2];
        a[(n - 1, n - 2)] = -(h[n - 3] + h[n - 2]);
        a[(n - 1, n - 1)] = h[n - 3];
        let second = a
            .lu()
            .solve(&b)
            .ok_or_else(|| ThermoError::InvalidTable("singular spline system".to_string()))?;
        Ok(Self {
            y: y.to_vec(),
            second: second.iter().copied().collect(),
        })
    }

    /// Value and first derivative on segment `i` at `x` (knots `xs`).
    fn eval(&self, xs: &[f64], i: usize, x: f64) -> (f64, f64) {
        let h = xs[i + 1] - xs[i];
        let a = (xs[i + 1] - x) / h;
        let b = 1.0 - a;
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope =
            (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        (value, slope)
    }
}

/// Tabulated saturation line with C² interpolation in `ln p`.
///
/// Immutable after construction and `Sync`; share it behind an `Arc`.
#[derive(Debug, Clone)]
pub struct SaturationCurve {
    pressures: Vec<f64>,
    log_p: Vec<f64>,
    t_s: Spline,
    rho_s: Spline,
    rho_w: Spline,
    h_s: Spline,
    h_w: Spline,
}

impl SaturationCurve {
    /// Curve built from the embedded saturation table.
    pub fn standard() -> Self {
        Self::from_csv(EMBEDDED_TABLE).expect("embedded saturation table is valid")
    }

    /// Builds a curve from CSV text with columns
    /// `p_Pa,T_s_K,rho_s,rho_w,h_s,h_w` (header row required).
    pub fn from_csv(text: &str) -> Result<Self, ThermoError> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse()).collect();
            let fields = fields.map_err(|e| {
                ThermoError::InvalidTable(format!("line {}: {e}", lineno + 1))
            })?;
            if fields.len() != 6 {
                return Err(ThermoError::InvalidTable(format!(
                    "line {}: expected 6 columns, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            rows.push([fields[0], fields[1], fields[2], fields[3], fields[4], fields[5]]);
        }
        Self::from_rows(&rows)
    }

    /// Builds a curve from rows `[p, T_s, rho_s, rho_w, h_s, h_w]`.
    pub fn from_rows(rows: &[[f64; 6]]) -> Result<Self, ThermoError> {
        if rows.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(ThermoError::InvalidTable(
                "pressures must be strictly increasing".to_string(),
            ));
        }
        if let Some(r) = rows.iter().find(|r| r[4] <= r[5] || r[3] <= r[2] || r[0] <= 0.0) {
            return Err(ThermoError::InvalidTable(format!(
                "row at p = {} violates h_s > h_w, rho_w > rho_s or p > 0",
                r[0]
            )));
        }
        let pressures: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let log_p: Vec<f64> = pressures.iter().map(|p| p.ln()).collect();
        let column = |k: usize| -> Vec<f64> { rows.iter().map(|r| r[k]).collect() };
        Ok(Self {
            t_s: Spline::fit(&log_p, &column(1))?,
            rho_s: Spline::fit(&log_p, &column(2))?,
            rho_w: Spline::fit(&log_p, &column(3))?,
            h_s: Spline::fit(&log_p, &column(4))?,
            h_w: Spline::fit(&log_p, &column(5))?,
            pressures,
            log_p,
        })
    }

    pub fn p_min(&self) -> f64 {
        self.pressures[0]
    }

    pub fn p_max(&self) -> f64 {
        self.pressures[self.pressures.len() - 1]
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.p_min() && p <= self.p_max()
    }

    fn check(&self, p: f64) -> Result<(), ThermoError> {
        if !p.is_finite() {
            Err(ThermoError::NonFinite(p))
        } else if p < self.p_min() {
            Err(ThermoError::BelowRange { p, min: self.p_min() })
        } else if p > self.p_max() {
            Err(ThermoError::AboveRange { p, max: self.p_max() })
        } else {
            Ok(())
        }
    }

    /// Saturation properties and their pressure derivatives at `p` (Pa).
    pub fn sat_props(&self, p: f64) -> Result<SaturationPoint, ThermoError> {
        self.check(p)?;
        let x = p.ln();
        let i = self
            .log_p
            .partition_point(|&k| k <= x)
            .clamp(1, self.log_p.len() - 1)
            - 1;
        let xs = &self.log_p;
        let (t_s, dt) = self.t_s.eval(xs, i, x);
        let (rho_s, drs) = self.rho_s.eval(xs, i, x);
        let (rho_w, drw) = self.rho_w.eval(xs, i, x);
        let (h_s, dhs) = self.h_s.eval(xs, i, x);
        let (h_w, dhw) = self.h_w.eval(xs, i, x);
        // d/dp = (1/p) d/d(ln p)
        Ok(SaturationPoint {
            p,
            t_s,
            rho_s,
            rho_w,
            h_s,
            h_w,
            d_rho_s_dp: drs / p,
            d_rho_w_dp: drw / p,
            d_h_s_dp: dhs / p,
            d_h_w_dp: dhw / p,
            d_t_s_dp: dt / p,
        })
    }

    /// Enthalpy of condensation `h_s(p) - h_w(p)` (J/kg).
    pub fn h_c(&self, p: f64) -> Result<f64, ThermoError> {
        Ok(self.sat_props(p)?.h_c())
    }

    /// Term-by-term breakdown of the boiler energy coefficient at `p`.
    pub fn energy_terms(&self, p: f64, boiler: &BoilerParams) -> Result<EnergyTerms, ThermoError> {
        let s = self.sat_props(p)?;
        Ok(energy_terms_at(&s, boiler))
    }

    /// Boiler energy coefficient `e(p)` (J/Pa): rate of change of stored
    /// internal energy per unit pressure change.
    pub fn e_coeff(&self, p: f64, boiler: &BoilerParams) -> Result<f64, ThermoError> {
        let e = self.energy_terms(p, boiler)?.total();
        if e <= 0.0 && boiler.steam_volume + boiler.water_volume + boiler.metal_mass > 0.0 {
            log::warn!("boiler energy coefficient e({p}) = {e} is not positive");
        }
        Ok(e)
    }

    /// The embedded table as CSV (`p_Pa,T_s_K,rho_s,rho_w,h_s,h_w`).
    pub fn table_csv(&self) -> String {
        let mut out = String::from("p_Pa,T_s_K,rho_s,rho_w,h_s,h_w\n");
        for (i, p) in self.pressures.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p, self.t_s.y[i], self.rho_s.y[i], self.rho_w.y[i], self.h_s.y[i], self.h_w.y[i]
            );
        }
        out
    }

    pub fn knots(&self) -> &[f64] {
        &self.pressures
    }
}

impl Default for SaturationCurve {
    fn default() -> Self {
        Self::standard()
    }
}

pub(crate) fn energy_terms_at(s: &SaturationPoint, b: &BoilerParams) -> EnergyTerms {
    EnergyTerms {
        latent: s.h_c() * b.steam_volume * s.d_rho_s_dp,
        steam_enthalpy: s.rho_s * b.steam_volume * s.d_h_s_dp,
        water_enthalpy: s.rho_w * b.water_volume * s.d_h_w_dp,
        metal: b.metal_mass * b.metal_specific_heat * s.d_t_s_dp,
        volume: -b.steam_volume - b.water_volume,
    }
}
