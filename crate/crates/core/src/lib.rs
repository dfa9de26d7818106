//! Slow-fast dynamics of multi-site steam supply networks.
//!
//! Boilers at network vertices exchange saturated steam through pipes. The
//! lumped model ([`lumped`]) couples boiler pressures to pipe velocities with a
//! small parameter `ε`; its leading-order fast limit ([`inner_limit`]) has a
//! line of equilibria whose normal hyperbolicity [`spectral`] certifies.
//! [`simulate`] integrates either model through scheduled input changes and
//! [`pde_oracle`] solves the distributed pipe equations as a reference.
//!
//! Independent runs (manifold samples, ε sweeps, heat-loss sweeps) fan out
//! over rayon when the default `parallel` feature is on; see [`par`].

pub mod inner_limit;
pub mod lumped;
pub mod network;
pub mod ode;
pub mod par;
pub mod pde_oracle;
pub mod simulate;
pub mod spectral;
pub mod thermo;

pub use inner_limit::{build_inner, check_heat_balance, rhs_inner, solve_equilibrium, EquilibriumSet, InnerLimitSystem};
pub use lumped::{rhs_full, ReferenceQuantities, Schedule, SystemParams, SystemState};
pub use network::{kirchhoff_matrix, subspace_analysis, Network, PipeParams};
pub use par::Execution;
pub use pde_oracle::{build_oracle, compare_models, integrate_oracle, step_oracle, OracleConfig};
pub use simulate::{derived_outputs, integrate, make_periodic_scenario, make_step_scenario, ModelKind, Scenario, TimeSeries};
pub use spectral::{linearize, nhim_certificate, trace_manifold, ManifoldTrace, SpectralReport};
pub use thermo::{BoilerParams, SaturationCurve};
