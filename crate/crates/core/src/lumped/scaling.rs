//! Reference quantities and the dimensionless groups of the model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Base reference quantities. Everything else is derived from these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceQuantities {
    /// Pipe length scale `L_r` (m).
    pub length: f64,
    /// Steam velocity scale `u_r` (m/s).
    pub velocity: f64,
    /// Pressure scale `p_r` (Pa).
    pub pressure: f64,
    /// Steam density scale `ρ_r` (kg/m³).
    pub density: f64,
    /// Pipe diameter scale `d_r` (m).
    pub diameter: f64,
}

impl ReferenceQuantities {
    /// 200 m, 30 m/s, 800 kPa, 4.16 kg/m³, 0.2 m.
    pub fn table_default() -> Self {
        Self {
            length: 200.0,
            velocity: 30.0,
            pressure: 8.0e5,
            density: 4.16,
            diameter: 0.2,
        }
    }

    pub fn is_valid(&self) -> bool {
        [
            self.length,
            self.velocity,
            self.pressure,
            self.density,
            self.diameter,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite())
    }

    /// `t_r = L_r / u_r` (s).
    pub fn time(&self) -> f64 {
        self.length / self.velocity
    }

    /// `h_r = p_r / ρ_r` (J/kg).
    pub fn enthalpy(&self) -> f64 {
        self.pressure / self.density
    }

    /// `λ_r = d_r / L_r`.
    pub fn friction(&self) -> f64 {
        self.diameter / self.length
    }

    /// `m'_r = ρ_r d_r² u_r` (kg/s).
    pub fn mass_flow(&self) -> f64 {
        self.density * self.diameter * self.diameter * self.velocity
    }

    /// `Q'_r = h_r ρ_r d_r² u_r` (W).
    pub fn heat_flow(&self) -> f64 {
        self.enthalpy() * self.mass_flow()
    }

    /// `ε₂ = ρ_r u_r² / p_r`, the squared reference Mach-type number.
    pub fn eps2(&self) -> f64 {
        self.density * self.velocity * self.velocity / self.pressure
    }

    /// Energy-coefficient scale after the reset `e_r = d_r² L_r / ε₂` (J/Pa).
    pub fn energy_coeff(&self) -> f64 {
        self.diameter * self.diameter * self.length / self.eps2()
    }

    /// Reference value of a quantity class.
    pub fn scale(&self, class: QuantityClass) -> f64 {
        match class {
            QuantityClass::Length => self.length,
            QuantityClass::Diameter => self.diameter,
            QuantityClass::Time => self.time(),
            QuantityClass::Velocity => self.velocity,
            QuantityClass::Pressure => self.pressure,
            QuantityClass::Density => self.density,
            QuantityClass::Enthalpy => self.enthalpy(),
            QuantityClass::Friction => self.friction(),
            QuantityClass::MassFlow => self.mass_flow(),
            QuantityClass::HeatFlow => self.heat_flow(),
            QuantityClass::EnergyCoefficient => self.energy_coeff(),
        }
    }

    pub fn to_dimensionless(&self, class: QuantityClass, value: f64) -> f64 {
        value / self.scale(class)
    }

    pub fn to_dimensional(&self, class: QuantityClass, value: f64) -> f64 {
        value * self.scale(class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantityClass {
    Length,
    Diameter,
    Time,
    Velocity,
    Pressure,
    Density,
    Enthalpy,
    Friction,
    MassFlow,
    HeatFlow,
    EnergyCoefficient,
}

impl QuantityClass {
    pub const ALL: [QuantityClass; 11] = [
        QuantityClass::Length,
        QuantityClass::Diameter,
        QuantityClass::Time,
        QuantityClass::Velocity,
        QuantityClass::Pressure,
        QuantityClass::Density,
        QuantityClass::Enthalpy,
        QuantityClass::Friction,
        QuantityClass::MassFlow,
        QuantityClass::HeatFlow,
        QuantityClass::EnergyCoefficient,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            QuantityClass::Length => "length",
            QuantityClass::Diameter => "diameter",
            QuantityClass::Time => "time",
            QuantityClass::Velocity => "velocity",
            QuantityClass::Pressure => "pressure",
            QuantityClass::Density => "density",
            QuantityClass::Enthalpy => "enthalpy",
            QuantityClass::Friction => "friction",
            QuantityClass::MassFlow => "mass_flow",
            QuantityClass::HeatFlow => "heat_flow",
            QuantityClass::EnergyCoefficient => "energy_coefficient",
        }
    }
}

impl fmt::Display for QuantityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown quantity class `{0}`")]
pub struct UnknownQuantity(pub String);

impl FromStr for QuantityClass {
    type Err = UnknownQuantity;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QuantityClass::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| UnknownQuantity(s.to_string()))
    }
}

/// Small parameters of the boiler, momentum and energy equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Epsilons {
    /// `d_r² L_r / e_r` with the caller's raw boiler scale.
    pub eps1: f64,
    pub eps2: f64,
    /// `d_r² L_r Q_wr / Q'_r`.
    pub eps3: f64,
    /// The single parameter of the reset model (`ε₁ = ε₂`).
    pub eps: f64,
    /// Boiler scale after the reset.
    pub e_ref: f64,
}

/// Computes the small parameters for a raw boiler scale `e_r_raw` (J/Pa)
/// and a pipe heat-loss scale `q_w_r` (W/m³).
pub fn compute_epsilons(refs: &ReferenceQuantities, e_r_raw: f64, q_w_r: f64) -> Epsilons {
    let d2l = refs.diameter * refs.diameter * refs.length;
    let eps2 = refs.eps2();
    Epsilons {
        eps1: d2l / e_r_raw,
        eps2,
        eps3: d2l * q_w_r / refs.heat_flow(),
        eps: eps2,
        e_ref: refs.energy_coeff(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps2_from_table_values() {
        let r = ReferenceQuantities::table_default();
        let e = compute_epsilons(&r, 3073.0, 0.0);
        assert!((e.eps2 - 4.16 * 900.0 / 8.0e5).abs() < 1e-15);
        assert!((e.eps2 - 4.68e-3).abs() < 1e-5);
        assert_eq!(e.eps3, 0.0);
        let d2l = r.diameter * r.diameter * r.length;
        assert_eq!(d2l / e.e_ref / e.eps2, 1.0);
        assert_eq!(e.eps, e.eps2);
    }

    #[test]
    fn table_scaled_values() {
        let r = ReferenceQuantities::table_default();
        assert_eq!(r.to_dimensionless(QuantityClass::Pressure, 8.0e5), 1.0);
        let h_s = r.to_dimensionless(QuantityClass::Enthalpy, 2768e3);
        assert!((h_s - 14.3).abs() / 14.3 < 0.01, "{h_s}");
        let lam = r.to_dimensionless(QuantityClass::Friction, 0.016);
        assert!((lam - 16.0).abs() < 1e-12);
        let q = r.to_dimensionless(QuantityClass::HeatFlow, 5.0e6);
        assert!((q - 5.2).abs() / 5.2 < 0.01, "{q}");
    }

    #[test]
    fn derived_relations() {
        let r = ReferenceQuantities::table_default();
        assert_eq!(r.time(), r.length / r.velocity);
        assert_eq!(r.heat_flow(), r.enthalpy() * r.density * r.diameter.powi(2) * r.velocity);
        assert!(r.is_valid());
    }

    #[test]
    fn unknown_class_is_an_error() {
        assert_eq!("pressure".parse::<QuantityClass>(), Ok(QuantityClass::Pressure));
        assert!("voltage".parse::<QuantityClass>().is_err());
    }
}
