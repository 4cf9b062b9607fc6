use crate::control::{ControlLaw, ControllerConfig, DensityController, FeedbackField};
use crate::density::{Density, DensityParams};
use crate::error::{invalid, Error, Result};
use crate::geometry::{DomainBox, Environment, GeometryMode, StateVector};
use crate::scalar::{wrap_angle, Scalar};

use super::integrator::{rk4_slice, simulate_integrator, IntegratorConfig, Outcome, SimOptions, Trajectory};

/// Planar two-link arm with point masses at the link tips. Angles are
/// measured from the downward vertical, `q2` relative to link 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLinkArm<T> {
    pub m1: T,
    pub m2: T,
    pub l1: T,
    pub l2: T,
    pub g: T,
}

impl<T: Scalar> TwoLinkArm<T> {
    pub fn new(m1: T, m2: T, l1: T, l2: T, g: T) -> Result<Self> {
        for (name, v) in [("m1", m1), ("m2", m2), ("l1", l1), ("l2", l2)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(invalid(name, "must be > 0"));
            }
        }
        if !(g.is_finite() && g >= T::zero()) {
            return Err(invalid("g", "must be >= 0"));
        }
        Ok(Self { m1, m2, l1, l2, g })
    }

    /// Unit masses and lengths, `g = 9.81`.
    pub fn unity() -> Self {
        Self {
            m1: T::one(),
            m2: T::one(),
            l1: T::one(),
            l2: T::one(),
            g: T::lit(9.81),
        }
    }

    pub fn reach(&self) -> T {
        self.l1 + self.l2
    }

    pub fn mass_matrix(&self, q: [T; 2]) -> [[T; 2]; 2] {
        let c2 = q[1].cos();
        let two = T::lit(2.0);
        let a = self.m2 * self.l2 * self.l2;
        let b = self.m2 * self.l1 * self.l2 * c2;
        let m11 = (self.m1 + self.m2) * self.l1 * self.l1 + a + two * b;
        let m12 = a + b;
        [[m11, m12], [m12, a]]
    }

    /// Coriolis, centrifugal and gravity torques.
    pub fn bias(&self, q: [T; 2], qd: [T; 2]) -> [T; 2] {
        let h = self.m2 * self.l1 * self.l2 * q[1].sin();
        let two = T::lit(2.0);
        let s1 = q[0].sin();
        let s12 = (q[0] + q[1]).sin();
        let g1 = (self.m1 + self.m2) * self.g * self.l1 * s1 + self.m2 * self.g * self.l2 * s12;
        let g2 = self.m2 * self.g * self.l2 * s12;
        [
            -h * (two * qd[0] * qd[1] + qd[1] * qd[1]) + g1,
            h * qd[0] * qd[0] + g2,
        ]
    }

    pub fn kinetic_energy(&self, q: [T; 2], qd: [T; 2]) -> T {
        let m = self.mass_matrix(q);
        let half = T::lit(0.5);
        half * (m[0][0] * qd[0] * qd[0] + T::lit(2.0) * m[0][1] * qd[0] * qd[1] + m[1][1] * qd[1] * qd[1])
    }

    pub fn potential_energy(&self, q: [T; 2]) -> T {
        -(self.m1 + self.m2) * self.g * self.l1 * q[0].cos() - self.m2 * self.g * self.l2 * (q[0] + q[1]).cos()
    }

    /// `qdd = M^-1 (u - H)`.
    pub fn forward(&self, q: [T; 2], qd: [T; 2], u: [T; 2]) -> [T; 2] {
        let m = self.mass_matrix(q);
        let h = self.bias(q, qd);
        solve2(m, [u[0] - h[0], u[1] - h[1]])
    }

    /// Base, elbow and tip positions in the plane (y up).
    pub fn link_points(&self, q: [T; 2]) -> [[T; 2]; 3] {
        let elbow = [self.l1 * q[0].sin(), -self.l1 * q[0].cos()];
        let a = q[0] + q[1];
        let tip = [elbow[0] + self.l2 * a.sin(), elbow[1] - self.l2 * a.cos()];
        [[T::zero(), T::zero()], elbow, tip]
    }
}

fn solve2<T: Scalar>(m: [[T; 2]; 2], b: [T; 2]) -> [T; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        (m[1][1] * b[0] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmGains<T> {
    pub kp: [T; 2],
    pub kv: [T; 2],
}

impl<T: Scalar> ArmGains<T> {
    pub fn new(kp: [T; 2], kv: [T; 2]) -> Result<Self> {
        if !kp.iter().all(|&k| k.is_finite() && k > T::zero()) {
            return Err(invalid("kp", "diagonal entries must be > 0"));
        }
        if !kv.iter().all(|&k| k.is_finite() && k > T::zero()) {
            return Err(invalid("kv", "diagonal entries must be > 0"));
        }
        Ok(Self { kp, kv })
    }
}

/// Joint-space reference `q_d(t)` sampled at `spacing`.
#[derive(Debug, Clone)]
pub struct Reference<T> {
    pub spacing: T,
    pub q: Vec<[T; 2]>,
    pub qd: Vec<[T; 2]>,
    pub qdd: Vec<[T; 2]>,
    pub planning: Trajectory<T>,
}

impl<T: Scalar> Reference<T> {
    pub fn duration(&self) -> T {
        self.spacing * T::from_usize(self.q.len().saturating_sub(1)).unwrap()
    }

    /// `(q_d, qdot_d, qddot_d)` at `t`; held at the last sample afterwards.
    pub fn at(&self, t: T) -> ([T; 2], [T; 2], [T; 2]) {
        let i = (t / self.spacing).round().to_usize().unwrap_or(0);
        if i + 1 >= self.q.len() {
            let z = [T::zero(); 2];
            return (*self.q.last().unwrap(), z, z);
        }
        (self.q[i], self.qd[i], self.qdd[i])
    }
}

fn pair<T: Copy>(v: &[T]) -> [T; 2] {
    [v[0], v[1]]
}

/// Integrate the planning system `qdot = k(q)` on the torus.
///
/// The reference is sampled at `arm_dt / 2`, so every stage of an arm RK4
/// step of size `arm_dt` lands on a sample. `qdot_d` is the field itself,
/// `qddot_d` its central difference.
pub fn generate_reference<T: Scalar>(
    env_joint: &Environment<T>,
    params: DensityParams<T>,
    ctrl: &ControllerConfig<T>,
    cfg: &IntegratorConfig<T>,
    q0: [T; 2],
) -> Result<Reference<T>> {
    if env_joint.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: env_joint.dim(),
        });
    }
    let spacing = cfg.dt / T::lit(2.0);
    let mut plan_cfg = cfg.clone();
    plan_cfg.dt = spacing;
    plan_cfg.record_stride = 1;
    let controller = DensityController::new(Density::new(env_joint, params), ctrl.clone(), ControlLaw::Blended);
    let planning = simulate_integrator(
        env_joint,
        &controller,
        &plan_cfg,
        &StateVector::from(q0.to_vec()),
        &SimOptions::default(),
    )?;
    let q: Vec<[T; 2]> = planning.states.iter().map(|s| pair(s.as_slice())).collect();
    let mut qd: Vec<[T; 2]> = planning.controls.iter().map(|u| pair(u)).collect();
    if let Some(last) = qd.last_mut() {
        if planning.outcome == Outcome::Converged {
            *last = [T::zero(); 2];
        }
    }
    let n = qd.len();
    let mut qdd = vec![[T::zero(); 2]; n];
    if n >= 2 {
        let two_h = spacing + spacing;
        for i in 0..n {
            let (a, b, den) = if i == 0 {
                (qd[1], qd[0], spacing)
            } else if i == n - 1 {
                (qd[n - 1], qd[n - 2], spacing)
            } else {
                (qd[i + 1], qd[i - 1], two_h)
            };
            qdd[i] = [(a[0] - b[0]) / den, (a[1] - b[1]) / den];
        }
    }
    Ok(Reference {
        spacing,
        q,
        qd,
        qdd,
        planning,
    })
}

/// Horizon and success tolerance for the closed-loop arm run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmRunConfig<T> {
    pub dt: T,
    /// Extra time simulated after the reference ends.
    pub settle_time: T,
    /// Final wrapped joint error counted as converged.
    pub tolerance: T,
    /// Radius of the linear zone of the error-space tracking field.
    pub error_blend_delta: T,
}

/// Closed-loop arm under `u = M qdd_d + H + M (Kp k(e) - Kv edot)`.
///
/// `k` is the blended density field of an obstacle-free problem in error
/// coordinates with target `e = 0` and the same distance kind.
#[allow(clippy::too_many_arguments)]
pub fn simulate_arm<T: Scalar>(
    arm: &TwoLinkArm<T>,
    gains: &ArmGains<T>,
    env_joint: &Environment<T>,
    params: DensityParams<T>,
    reference: &Reference<T>,
    run: &ArmRunConfig<T>,
    q0: [T; 2],
    qdot0: [T; 2],
) -> Result<Trajectory<T>> {
    if !(run.dt.is_finite() && run.dt > T::zero()) {
        return Err(invalid("dt", "must be > 0"));
    }
    let pi = T::PI();
    let err_env = Environment::new(
        StateVector::zeros(2),
        Vec::new(),
        DomainBox::new(vec![-pi; 2], vec![pi; 2])?,
        run.error_blend_delta,
        GeometryMode::Toroidal,
    )?;
    let tracker = DensityController::new(
        Density::new(&err_env, params),
        ControllerConfig::new(run.error_blend_delta)?,
        ControlLaw::Blended,
    );
    let torque = |t: T, s: &[T]| -> Result<[T; 2]> {
        let q = [s[0], s[1]];
        let qdot = [s[2], s[3]];
        let (qr, qdr, qddr) = reference.at(t);
        let e = [wrap_angle(q[0] - qr[0]), wrap_angle(q[1] - qr[1])];
        let k = tracker.command(&e)?;
        let a = [
            qddr[0] + gains.kp[0] * k[0] - gains.kv[0] * (qdot[0] - qdr[0]),
            qddr[1] + gains.kp[1] * k[1] - gains.kv[1] * (qdot[1] - qdr[1]),
        ];
        let m = arm.mass_matrix(q);
        let h = arm.bias(q, qdot);
        Ok([
            m[0][0] * a[0] + m[0][1] * a[1] + h[0],
            m[1][0] * a[0] + m[1][1] * a[1] + h[1],
        ])
    };

    let dt = run.dt;
    let horizon = reference.duration() + run.settle_time;
    let steps = (horizon / dt).ceil().to_usize().unwrap_or(0);
    let mut x = vec![q0[0], q0[1], qdot0[0], qdot0[1]];
    let mut occupancy = vec![0.0; env_joint.obstacles.len()];
    let mut min_h = f64::INFINITY;
    let mut path_length = 0.0;
    let mut max_control: f64 = 0.0;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let mut outcome = None;

    for step in 0..=steps {
        let t = T::from_usize(step).unwrap() * dt;
        let q = [x[0], x[1]];
        for (k, o) in env_joint.obstacles.iter().enumerate() {
            let h = o.h.value_unchecked(&q, GeometryMode::Toroidal).as_f64();
            min_h = min_h.min(h);
            if step > 0 && h <= 0.0 {
                occupancy[k] += dt.as_f64();
            }
        }
        let u = torque(t, &x);
        let u = match u {
            Ok(u) if u.iter().all(|c| c.is_finite()) && x.iter().all(|c| c.is_finite()) => u,
            _ => {
                outcome = Some(Outcome::NumericalFailure);
                times.push(t);
                states.push(StateVector::from(x.clone()));
                controls.push(vec![T::nan(); 2]);
                break;
            }
        };
        max_control = max_control.max(u[0].abs().as_f64().max(u[1].abs().as_f64()));
        times.push(t);
        states.push(StateVector::from(x.clone()));
        controls.push(u.to_vec());
        if step == steps {
            break;
        }
        // time-dependent field: stage times t, t + dt/2, t + dt
        let mut stage = 0usize;
        let half = dt / T::lit(2.0);
        let mut f = |s: &[T]| -> Result<Vec<T>> {
            let ts = t + match stage {
                0 => T::zero(),
                1 | 2 => half,
                _ => dt,
            };
            stage += 1;
            let tau = torque(ts, s)?;
            let qdd = arm.forward([s[0], s[1]], [s[2], s[3]], tau);
            Ok(vec![s[2], s[3], qdd[0], qdd[1]])
        };
        let next = match rk4_slice(&mut f, &x, dt) {
            Ok(v) => v,
            Err(_) => {
                outcome = Some(Outcome::NumericalFailure);
                break;
            }
        };
        let dq0 = wrap_angle(next[0] - x[0]).as_f64();
        let dq1 = wrap_angle(next[1] - x[1]).as_f64();
        path_length += (dq0 * dq0 + dq1 * dq1).sqrt();
        x = next;
        x[0] = wrap_angle(x[0]);
        x[1] = wrap_angle(x[1]);
    }

    let target = env_joint.target.as_slice();
    let err = (wrap_angle(x[0] - target[0]).powi(2) + wrap_angle(x[1] - target[1]).powi(2)).sqrt();
    let outcome = outcome.unwrap_or(if occupancy.iter().any(|&o| o > 0.0) {
        Outcome::UnsafeEntered
    } else if err <= run.tolerance {
        Outcome::Converged
    } else {
        Outcome::MaxTime
    });
    let final_time = times.last().map(|t| t.as_f64()).unwrap_or(0.0);
    let steps_done = times.len().saturating_sub(1);
    Ok(Trajectory {
        times,
        states,
        controls,
        outcome,
        occupancy_time_unsafe: occupancy,
        min_h,
        path_length,
        final_state: StateVector::from(x),
        final_time,
        steps: steps_done,
        max_control,
    })
}
