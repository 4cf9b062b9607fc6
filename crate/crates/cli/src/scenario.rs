//! Declarative scenario files (TOML). Every table rejects unknown keys;
//! semantic checks run after parsing and name the offending field.

use std::path::Path;

use densnav_core::baseline_nf::{cover_with_discs, ComparisonSetup, SphereWorld};
use densnav_core::dynamics::{ArmGains, ArmRunConfig, JointMapConfig, TaskDisc};
use densnav_core::verify::IcSampler;
use densnav_core::{
    ControllerConfig, DensityParams, DistanceKind, DomainBox, Environment, GeometryMode, ImplicitFn,
    ImplicitKind, IntegratorConfig, Method, Monomial, NoiseModel, Obstacle, StateVector, TwoLinkArm,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

fn is_false(b: &bool) -> bool {
    !*b
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub environment: EnvironmentSpec,
    pub density: DensitySpec,
    pub controller: ControllerSpec,
    pub integrator: IntegratorSpec,
    pub initial_conditions: IcSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<ArmSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub dimension: usize,
    pub domain_lo: Vec<f64>,
    pub domain_hi: Vec<f64>,
    pub target: Vec<f64>,
    pub delta: f64,
    #[serde(default)]
    pub geometry_mode: GeometryMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

/// One implicit field; `kind` selects the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Sphere {
        center: Vec<f64>,
        radius: f64,
    },
    Ellipsoid {
        center: Vec<f64>,
        scale: Vec<f64>,
        radius: f64,
    },
    Superellipse {
        center: Vec<f64>,
        radius: f64,
        norm_order: f64,
        power: f64,
    },
    AxisCylinder {
        center: Vec<f64>,
        axis: usize,
        radius: f64,
    },
    Torus {
        center: Vec<f64>,
        axis: usize,
        major: f64,
        minor: f64,
    },
    Polynomial {
        center: Vec<f64>,
        terms: Vec<MonomialSpec>,
    },
    SkewedOval {
        center: Vec<f64>,
        a: f64,
        b: f64,
        c: f64,
        radius: f64,
    },
    CShape {
        center: Vec<f64>,
        ring_radius: f64,
        half_width: f64,
        cut: f64,
        cut_power: u32,
        #[serde(default = "one")]
        scale: f64,
    },
}

impl ShapeSpec {
    pub fn build(&self) -> densnav_core::Result<ImplicitFn<f64>> {
        match self.clone() {
            ShapeSpec::Sphere { center, radius } => ImplicitFn::sphere(center, radius),
            ShapeSpec::Ellipsoid { center, scale, radius } => ImplicitFn::ellipsoid(center, scale, radius),
            ShapeSpec::Superellipse {
                center,
                radius,
                norm_order,
                power,
            } => ImplicitFn::new(ImplicitKind::Superellipse {
                center,
                radius,
                norm_order,
                power,
            }),
            ShapeSpec::AxisCylinder { center, axis, radius } => {
                ImplicitFn::new(ImplicitKind::AxisCylinder { center, axis, radius })
            }
            ShapeSpec::Torus {
                center,
                axis,
                major,
                minor,
            } => ImplicitFn::new(ImplicitKind::Torus {
                center,
                axis,
                major,
                minor,
            }),
            ShapeSpec::Polynomial { center, terms } => ImplicitFn::new(ImplicitKind::Polynomial {
                center,
                terms: terms
                    .into_iter()
                    .map(|t| Monomial {
                        coeff: t.coeff,
                        exponents: t.exponents,
                    })
                    .collect(),
            }),
            ShapeSpec::SkewedOval { center, a, b, c, radius } => {
                ImplicitFn::new(ImplicitKind::SkewedOval { center, a, b, c, radius })
            }
            ShapeSpec::CShape {
                center,
                ring_radius,
                half_width,
                cut,
                cut_power,
                scale,
            } => ImplicitFn::c_shape(center, ring_radius, half_width, cut, cut_power)?.scaled(scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub label: String,
    #[serde(rename = "unsafe")]
    pub unsafe_set: ShapeSpec,
    /// Sensing boundary; give either this or `margin`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensing: Option<ShapeSpec>,
    /// Sensing boundary `h - margin`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub alpha: f64,
    pub theta: f64,
    #[serde(default)]
    pub distance_kind: DistanceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub blend_delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

fn stride_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default)]
    pub method: Method,
    pub dt: f64,
    pub max_time: f64,
    pub converge_radius: f64,
    #[serde(default)]
    pub safety_margin: f64,
    #[serde(default = "stride_one")]
    pub record_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IcSpec {
    Explicit {
        points: Vec<Vec<f64>>,
    },
    /// Evenly spaced on the segment, endpoints included.
    Line {
        from: Vec<f64>,
        to: Vec<f64>,
        count: usize,
    },
    /// Uniform in the box, unsafe points rejected.
    Uniform {
        lo: Vec<f64>,
        hi: Vec<f64>,
        count: usize,
        seed: u64,
    },
    /// Uniform in the ball, unsafe points and the target neighbourhood
    /// rejected.
    Cavity {
        center: Vec<f64>,
        radius: f64,
        count: usize,
        seed: u64,
    },
}

impl IcSpec {
    pub fn count(&self) -> usize {
        match self {
            IcSpec::Explicit { points } => points.len(),
            IcSpec::Line { count, .. } | IcSpec::Uniform { count, .. } | IcSpec::Cavity { count, .. } => *count,
        }
    }

    pub fn with_count(&self, n: usize) -> Self {
        let mut s = self.clone();
        match &mut s {
            IcSpec::Explicit { points } => points.truncate(n),
            IcSpec::Line { count, .. } | IcSpec::Uniform { count, .. } | IcSpec::Cavity { count, .. } => *count = n,
        }
        s
    }

    /// Lebesgue measure of the sampled region (0 for lines and point lists).
    pub fn measure(&self) -> f64 {
        match self {
            IcSpec::Uniform { lo, hi, .. } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            IcSpec::Cavity { center, radius, .. } => {
                let n = center.len() as i32;
                match n {
                    2 => std::f64::consts::PI * radius.powi(2),
                    3 => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
                    _ => 0.0,
                }
            }
            _ => 0.0,
        }
    }
}

fn default_alphas() -> Vec<f64> {
    vec![1.0, 4.0, 10.0, 50.0]
}

fn default_resolution() -> usize {
    200
}

fn default_x0() -> usize {
    200
}

fn default_points() -> usize {
    1000
}

fn default_gradient_band() -> f64 {
    1e-3
}

fn default_bound_samples() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// Alpha for the main divergence check; the density alpha if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_resolution")]
    pub grid_resolution: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_hi: Option<Vec<f64>>,
    /// Exclusion band around the level sets; two grid cells if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
    /// Radius skipped around the target; `delta` if absent, never less.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_exclusion: Option<f64>,
    #[serde(default = "default_x0")]
    pub x0_samples: usize,
    #[serde(default = "default_points")]
    pub gradient_points: usize,
    #[serde(default = "default_gradient_band")]
    pub gradient_band: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub convergence: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub occupancy: bool,
    #[serde(default = "default_bound_samples")]
    pub bound_samples: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            alpha: None,
            alphas: default_alphas(),
            grid_resolution: default_resolution(),
            grid_lo: None,
            grid_hi: None,
            band: None,
            target_exclusion: None,
            x0_samples: default_x0(),
            gradient_points: default_points(),
            gradient_band: default_gradient_band(),
            convergence: false,
            occupancy: false,
            bound_samples: default_bound_samples(),
        }
    }
}

fn default_cover_resolution() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSpec {
    /// Sensing radii for the density rows.
    pub radii: Vec<f64>,
    pub kappas: Vec<f64>,
    pub sphere_world_radius: f64,
    /// Centres of the discs whose union stands in for the C-shape.
    pub disc_centers: Vec<[f64; 2]>,
    #[serde(default = "default_cover_resolution")]
    pub cover_resolution: usize,
    pub cover_lo: [f64; 2],
    pub cover_hi: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDiscSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointMapSpec {
    pub resolution: usize,
    pub max_circle_radius: f64,
    pub sensing_margin: f64,
}

fn default_frames() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub masses: [f64; 2],
    pub lengths: [f64; 2],
    pub gravity: f64,
    pub kp: [f64; 2],
    pub kv: [f64; 2],
    pub q0: [f64; 2],
    #[serde(default)]
    pub qdot0: [f64; 2],
    #[serde(default)]
    pub task_discs: Vec<TaskDiscSpec>,
    pub joint_map: JointMapSpec,
    pub settle_time: f64,
    pub tolerance: f64,
    pub error_blend_delta: f64,
    #[serde(default = "default_frames")]
    pub frames: usize,
}

/// Everything the arm command needs, built from a scenario.
#[derive(Debug, Clone)]
pub struct ArmProblem {
    pub arm: TwoLinkArm<f64>,
    pub gains: ArmGains<f64>,
    /// Joint-space environment with the mapped task obstacles.
    pub env: Environment<f64>,
    pub discs: Vec<TaskDisc<f64>>,
    pub circles: Vec<([f64; 2], f64)>,
    pub notices: Vec<String>,
    pub run: ArmRunConfig<f64>,
    pub q0: [f64; 2],
    pub qdot0: [f64; 2],
}

fn core_err(field: impl Into<String>) -> impl FnOnce(densnav_core::Error) -> CliError {
    let field = field.into();
    move |source| CliError::Invalid {
        field,
        message: source.to_string(),
    }
}

fn bad(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

impl Scenario {
    /// Parse and validate. Syntax errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// The scenario and the raw bytes it was read from.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| bad("scenario", "not valid UTF-8"))?;
        let s = Self::from_toml_str(&text).map_err(|e| e.in_file(path))?;
        Ok((s, bytes))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Serialize(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let env = self.environment()?;
        self.density_params()?;
        self.controller_config()?;
        self.integrator_config()?;
        let n = env.dim();
        match &self.initial_conditions {
            IcSpec::Explicit { points } => {
                if let Some(k) = points.iter().position(|p| p.len() != n) {
                    return Err(bad(format!("initial_conditions.points[{k}]"), format!("expected {n} coordinates")));
                }
            }
            IcSpec::Line { from, to, .. } => {
                if from.len() != n || to.len() != n {
                    return Err(bad("initial_conditions", format!("endpoints need {n} coordinates")));
                }
            }
            IcSpec::Uniform { lo, hi, .. } => {
                if lo.len() != n || hi.len() != n || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(bad("initial_conditions", "lo and hi must have the state dimension with lo < hi"));
                }
            }
            IcSpec::Cavity { center, radius, .. } => {
                if center.len() != n {
                    return Err(bad("initial_conditions.center", format!("expected {n} coordinates")));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(bad("initial_conditions.radius", "must be > 0"));
                }
            }
        }
        if let Some(v) = &self.verify {
            if v.grid_resolution == 0 {
                return Err(bad("verify.grid_resolution", "must be >= 1"));
            }
            if let Some(a) = v.alpha {
                if !(a.is_finite() && a > 0.0) {
                    return Err(bad("verify.alpha", "must be > 0"));
                }
            }
            if v.alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(bad("verify.alphas", "every alpha must be > 0"));
            }
        }
        if self.comparison.is_some() {
            self.comparison_setup()?;
        }
        if self.arm.is_some() {
            self.arm_problem()?;
        }
        Ok(())
    }

    pub fn environment(&self) -> Result<Environment<f64>> {
        let e = &self.environment;
        let n = e.dimension;
        if n == 0 {
            return Err(bad("environment.dimension", "must be >= 1"));
        }
        for (name, v) in [("environment.target", &e.target), ("environment.domain_lo", &e.domain_lo), ("environment.domain_hi", &e.domain_hi)] {
            if v.len() != n {
                return Err(bad(name, format!("expected {n} coordinates, got {}", v.len())));
            }
        }
        let target = StateVector::new(e.target.clone()).map_err(core_err("environment.target"))?;
        let domain = DomainBox::new(e.domain_lo.clone(), e.domain_hi.clone()).map_err(core_err("environment.domain"))?;
        let obstacles = self
            .obstacles
            .iter()
            .enumerate()
            .map(|(k, o)| {
                let h = o.unsafe_set.build().map_err(core_err(format!("obstacles[{k}].unsafe")))?;
                if h.dim() != n {
                    return Err(bad(format!("obstacles[{k}].unsafe"), format!("dimension {} != {n}", h.dim())));
                }
                match (&o.sensing, o.margin) {
                    (Some(s), None) => {
                        let s = s.build().map_err(core_err(format!("obstacles[{k}].sensing")))?;
                        Obstacle::new(h, s, o.label.clone()).map_err(core_err(format!("obstacles[{k}].sensing")))
                    }
                    (None, Some(m)) => {
                        Obstacle::with_margin(h, m, o.label.clone()).map_err(core_err(format!("obstacles[{k}].margin")))
                    }
                    _ => Err(bad(format!("obstacles[{k}]"), "give exactly one of `sensing` and `margin`")),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Environment::new(target, obstacles, domain, e.delta, e.geometry_mode).map_err(core_err("environment"))
    }

    pub fn density_params(&self) -> Result<DensityParams<f64>> {
        let d = &self.density;
        DensityParams::new(d.alpha, d.theta, d.distance_kind).map_err(core_err("density"))
    }

    pub fn controller_config(&self) -> Result<ControllerConfig<f64>> {
        let c = &self.controller;
        let mut cfg = ControllerConfig::new(c.blend_delta).map_err(core_err("controller"))?;
        if let Some(m) = c.u_max {
            cfg = cfg.with_u_max(m).map_err(core_err("controller"))?;
        }
        if let Some(n) = &c.noise {
            let model = NoiseModel::new(n.mean.clone(), n.covariance.clone()).map_err(core_err("controller.noise"))?;
            if model.dim() != self.environment.dimension {
                return Err(bad("controller.noise", "dimension differs from the state dimension"));
            }
            cfg = cfg.with_noise(model);
        }
        Ok(cfg)
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig<f64>> {
        let i = &self.integrator;
        let cfg = IntegratorConfig {
            method: i.method,
            dt: i.dt,
            max_time: i.max_time,
            converge_radius: i.converge_radius,
            safety_margin: i.safety_margin,
            terminate_on_unsafe: true,
            record_stride: i.record_stride,
        };
        cfg.validate().map_err(core_err("integrator"))?;
        Ok(cfg)
    }

    pub fn initial_conditions(&self, env: &Environment<f64>) -> Result<Vec<StateVector<f64>>> {
        let sampler = match self.initial_conditions.clone() {
            IcSpec::Explicit { points } => IcSampler::Explicit { points },
            IcSpec::Line { from, to, count } => IcSampler::Line { from, to, count },
            IcSpec::Uniform { lo, hi, count, seed } => IcSampler::Uniform { lo, hi, count, seed },
            IcSpec::Cavity {
                center,
                radius,
                count,
                seed,
            } => return sample_ball(env, &center, radius, count, seed),
        };
        sampler.generate(env).map_err(core_err("initial_conditions"))
    }

    /// The C-shaped obstacle and its sensing template.
    fn c_shape_obstacle(&self) -> Result<&ObstacleSpec> {
        self.obstacles
            .iter()
            .find(|o| matches!(o.unsafe_set, ShapeSpec::CShape { .. }))
            .ok_or_else(|| bad("obstacles", "comparison needs an obstacle with a c_shape unsafe set"))
    }

    pub fn comparison_setup(&self) -> Result<ComparisonSetup<f64>> {
        let c = self
            .comparison
            .as_ref()
            .ok_or_else(|| bad("comparison", "section missing"))?;
        if self.environment.dimension != 2 {
            return Err(bad("environment.dimension", "comparison is planar"));
        }
        let o = self.c_shape_obstacle()?;
        let unsafe_set = o.unsafe_set.build().map_err(core_err("comparison.unsafe"))?;
        let sensing = match &o.sensing {
            Some(s @ (ShapeSpec::SkewedOval { .. } | ShapeSpec::Sphere { .. })) => {
                s.build().map_err(core_err("comparison.sensing"))?
            }
            _ => return Err(bad("comparison", "the c_shape obstacle needs a skewed_oval or sphere sensing shape")),
        };
        if c.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(bad("comparison.radii", "every radius must be > 0"));
        }
        let env = self.environment()?;
        let discs = cover_with_discs(&unsafe_set, c.cover_lo, c.cover_hi, c.cover_resolution, &c.disc_centers)
            .map_err(core_err("comparison.disc_centers"))?;
        let kappa = c.kappas.first().copied().unwrap_or(1.0);
        let world = SphereWorld::with_overlaps(c.sphere_world_radius, env.target.clone(), discs, kappa)
            .map_err(core_err("comparison"))?;
        for &k in &c.kappas {
            world.with_kappa(k).map_err(core_err("comparison.kappas"))?;
        }
        Ok(ComparisonSetup {
            target: env.target.clone(),
            unsafe_set,
            sensing,
            domain: env.domain.clone(),
            delta: env.delta,
            density: self.density_params()?,
            controller: self.controller_config()?,
            integrator: self.integrator_config()?,
            world,
        })
    }

    pub fn arm_problem(&self) -> Result<ArmProblem> {
        let a = self.arm.as_ref().ok_or_else(|| bad("arm", "section missing"))?;
        if self.environment.dimension != 2 || self.environment.geometry_mode != GeometryMode::Toroidal {
            return Err(bad("environment", "arm scenarios are planar and toroidal"));
        }
        let arm = TwoLinkArm::new(a.masses[0], a.masses[1], a.lengths[0], a.lengths[1], a.gravity)
            .map_err(core_err("arm"))?;
        let gains = ArmGains::new(a.kp, a.kv).map_err(core_err("arm"))?;
        let cfg = JointMapConfig {
            resolution: a.joint_map.resolution,
            max_circle_radius: a.joint_map.max_circle_radius,
            sensing_margin: a.joint_map.sensing_margin,
        };
        let base = self.environment()?;
        let mut obstacles = base.obstacles.clone();
        let mut circles = Vec::new();
        let mut notices = Vec::new();
        let mut discs = Vec::new();
        for (k, d) in a.task_discs.iter().enumerate() {
            let disc = TaskDisc {
                center: d.center,
                radius: d.radius,
            };
            let m = densnav_core::dynamics::map_task_obstacle_to_joint_space(&arm, &disc, &cfg)
                .map_err(core_err(format!("arm.task_discs[{k}]")))?;
            obstacles.extend(m.obstacles);
            circles.extend(m.circles);
            if let Some(n) = m.notice {
                notices.push(format!("task disc {k}: {n}"));
            }
            discs.push(disc);
        }
        let env = Environment::new(base.target, obstacles, base.domain, base.delta, GeometryMode::Toroidal)
            .map_err(core_err("arm"))?;
        let run = ArmRunConfig {
            dt: self.integrator.dt,
            settle_time: a.settle_time,
            tolerance: a.tolerance,
            error_blend_delta: a.error_blend_delta,
        };
        if !(run.settle_time.is_finite() && run.settle_time >= 0.0) {
            return Err(bad("arm.settle_time", "must be >= 0"));
        }
        if !(run.tolerance.is_finite() && run.tolerance > 0.0) {
            return Err(bad("arm.tolerance", "must be > 0"));
        }
        if !(run.error_blend_delta.is_finite() && run.error_blend_delta > 0.0) {
            return Err(bad("arm.error_blend_delta", "must be > 0"));
        }
        Ok(ArmProblem {
            arm,
            gains,
            env,
            discs,
            circles,
            notices,
            run,
            q0: a.q0,
            qdot0: a.qdot0,
        })
    }

    /// The environment the density acts on: the joint-space map for arm
    /// scenarios, the declared obstacles otherwise.
    pub fn working_environment(&self) -> Result<Environment<f64>> {
        if self.arm.is_some() {
            Ok(self.arm_problem()?.env)
        } else {
            self.environment()
        }
    }
}

/// Uniform draws in a ball, keeping safe points outside the target
/// neighbourhood.
fn sample_ball(env: &Environment<f64>, center: &[f64], radius: f64, count: usize, seed: u64) -> Result<Vec<StateVector<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 10_000 * count.max(1) {
            return Err(bad("initial_conditions", "cavity too small to sample"));
        }
        let u: Vec<f64> = center.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        if u.iter().map(|v| v * v).sum::<f64>() > 1.0 {
            continue;
        }
        let x: Vec<f64> = center.iter().zip(&u).map(|(c, v)| c + radius * v).collect();
        if env.in_unsafe_set(&x).is_none() && env.distance_to_target(&x) > env.delta {
            out.push(StateVector::from(x));
        }
    }
    Ok(out)
}
