//! Obstacles and sensing regions as implicit fields, region classification,
//! and sampled environment validation.

mod environment;
mod implicit;
mod state;

pub use environment::{DomainBox, Environment, Obstacle, Region, Violation};
pub use implicit::{GeometryMode, ImplicitFn, ImplicitKind, Monomial};
pub use state::StateVector;
