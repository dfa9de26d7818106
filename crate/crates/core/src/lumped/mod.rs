//! The dimensionless lumped-parameter network model and its scaling.

mod model;
pub mod scaling;
pub mod schedule;

pub use model::{rhs_full, FullModel, ModelError, SystemParams, SystemState, VertexThermo};
pub use scaling::{compute_epsilons, Epsilons, QuantityClass, ReferenceQuantities};
pub use schedule::Schedule;
