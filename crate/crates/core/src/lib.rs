//! Density-function feedback synthesis for almost-everywhere safe
//! navigation: implicit obstacle geometry, C-infinity bump functions, the
//! navigation density and its gradient, feedback laws, closed-loop
//! simulation, a navigation-function baseline and numerical audits.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod error;
pub mod geometry;
pub mod scalar;
pub mod smoothing;
pub mod density;
pub mod control;
pub mod dynamics;
pub mod baseline_nf;
pub mod verify;

pub use density::{theta_bound, Density, DensityParams, DistanceFn, DistanceKind, ThetaBound};
pub use baseline_nf::{run_comparison, ComparisonSetup, NfController, SphereWorld};
pub use control::{
    add_noise, blended_control, gradient_control, saturate, ControlLaw, ControllerConfig, DensityController,
    FeedbackField, NoiseModel,
};
pub use dynamics::{
    simulate_integrator, IntegratorConfig, Method, Outcome, SimOptions, Trajectory, TwoLinkArm,
};
pub use error::{Error, Result};
pub use geometry::{
    DomainBox, Environment, GeometryMode, ImplicitFn, ImplicitKind, Monomial, Obstacle, Region,
    StateVector, Violation,
};
pub use scalar::{derive_seed, wrap_angle, CompensatedSum, Scalar};
pub use smoothing::{elementary_f, inverse_bump, phi, smooth_step, smooth_step_deriv, BumpSpec};

pub type State64 = StateVector<f64>;
pub type State32 = StateVector<f32>;
pub type Environment64 = Environment<f64>;
pub type Environment32 = Environment<f32>;
pub type Obstacle64 = Obstacle<f64>;
pub type Obstacle32 = Obstacle<f32>;
pub type ImplicitFn64 = ImplicitFn<f64>;
pub type ImplicitFn32 = ImplicitFn<f32>;
pub type DensityParams64 = DensityParams<f64>;
pub type DensityParams32 = DensityParams<f32>;
pub type Trajectory64 = Trajectory<f64>;
pub type Trajectory32 = Trajectory<f32>;
pub type IntegratorConfig64 = IntegratorConfig<f64>;
pub type ControllerConfig64 = ControllerConfig<f64>;
pub type TwoLinkArm64 = TwoLinkArm<f64>;
pub type SphereWorld64 = SphereWorld<f64>;
