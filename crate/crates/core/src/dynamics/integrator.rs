use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{FeedbackField, NoiseModel};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Environment, GeometryMode, StateVector};
use crate::scalar::{wrap_angle, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig<T> {
    pub method: Method,
    pub dt: T,
    pub max_time: T,
    pub converge_radius: T,
    pub safety_margin: T,
    /// Stop at the first step with `min_k h_k < -safety_margin`.
    pub terminate_on_unsafe: bool,
    /// Keep every `record_stride`-th sample (the last sample is always kept).
    pub record_stride: usize,
}

impl<T: Scalar> IntegratorConfig<T> {
    pub fn new(dt: T, max_time: T, converge_radius: T) -> Result<Self> {
        let c = Self {
            method: Method::Rk4,
            dt,
            max_time,
            converge_radius,
            safety_margin: T::zero(),
            terminate_on_unsafe: true,
            record_stride: 1,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return Err(invalid("dt", "must be > 0"));
        }
        if !(self.max_time.is_finite() && self.max_time >= T::zero()) {
            return Err(invalid("max_time", "must be >= 0"));
        }
        if !(self.converge_radius.is_finite() && self.converge_radius > T::zero()) {
            return Err(invalid("converge_radius", "must be > 0"));
        }
        if !(self.safety_margin.is_finite() && self.safety_margin >= T::zero()) {
            return Err(invalid("safety_margin", "must be >= 0"));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be >= 1"));
        }
        Ok(())
    }

    pub fn max_steps(&self) -> usize {
        let r = (self.max_time / self.dt).as_f64();
        let n = if (r - r.round()).abs() <= 1e-9 * r.max(1.0) { r.round() } else { r.ceil() };
        n as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    MaxTime,
    UnsafeEntered,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<StateVector<T>>,
    pub controls: Vec<Vec<T>>,
    pub outcome: Outcome,
    /// `sum dt * 1[h_k(x) <= 0]` per obstacle.
    pub occupancy_time_unsafe: Vec<f64>,
    /// Smallest `min_k h_k` seen along the path.
    pub min_h: f64,
    pub path_length: f64,
    pub final_state: StateVector<T>,
    pub final_time: f64,
    pub steps: usize,
    /// Largest `|u|_inf` over all commanded controls, recorded or not.
    pub max_control: f64,
}

impl<T: Scalar> Trajectory<T> {
    pub fn entered_unsafe(&self) -> bool {
        self.occupancy_time_unsafe.iter().any(|&t| t > 0.0)
    }

    pub fn total_occupancy(&self) -> f64 {
        self.occupancy_time_unsafe.iter().sum()
    }
}

/// Per-run options: noise realization and audit switches.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions<'a> {
    pub noise: Option<&'a NoiseModel>,
    pub seed: u64,
    /// Audit mode: accept an initial condition inside an unsafe set.
    pub allow_unsafe_start: bool,
}

/// One classical Runge-Kutta step of `xdot = f(x)`.
pub fn step_rk4<T, F>(mut f: F, x: &StateVector<T>, dt: T) -> Result<StateVector<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    rk4_slice(&mut f, x.as_slice(), dt).map(StateVector::from)
}

/// One explicit Euler step of `xdot = f(x)`.
pub fn step_euler<T, F>(mut f: F, x: &StateVector<T>, dt: T) -> Result<StateVector<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let k = f(x.as_slice())?;
    Ok(x.iter().zip(&k).map(|(&a, &b)| a + dt * b).collect::<Vec<_>>().into())
}

pub(crate) fn rk4_slice<T, F>(f: &mut F, x: &[T], dt: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let half = dt / T::lit(2.0);
    let stage = |k: &[T], h: T| -> Vec<T> { x.iter().zip(k).map(|(&a, &b)| a + h * b).collect() };
    let k1 = f(x)?;
    let k2 = f(&stage(&k1, half))?;
    let k3 = f(&stage(&k2, half))?;
    let k4 = f(&stage(&k3, dt))?;
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    Ok((0..x.len())
        .map(|i| x[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect())
}

fn wrap_state<T: Scalar>(x: &mut [T], mode: GeometryMode) {
    if mode == GeometryMode::Toroidal {
        for c in x.iter_mut() {
            *c = wrap_angle(*c);
        }
    }
}

/// Integrate `xdot = field(x)` (plus optional additive white noise) from `ic`.
pub fn simulate_integrator<T, F>(
    env: &Environment<T>,
    field: &F,
    cfg: &IntegratorConfig<T>,
    ic: &StateVector<T>,
    opts: &SimOptions<'_>,
) -> Result<Trajectory<T>>
where
    T: Scalar,
    F: FeedbackField<T> + ?Sized,
{
    cfg.validate()?;
    let n = env.dim();
    ic.check_dim(n)?;
    if field.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: field.dim(),
        });
    }
    if let Some(nm) = opts.noise {
        if nm.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: nm.dim(),
            });
        }
    }
    if !env.domain.contains(ic.as_slice()) {
        return Err(Error::OutsideDomain(format!("{:?}", ic.to_f64())));
    }
    if let Some(k) = env.in_unsafe_set(ic.as_slice()) {
        if !opts.allow_unsafe_start {
            return Err(Error::UnsafeInitialCondition(k));
        }
    }

    let mode = env.mode;
    let dt = cfg.dt;
    let dt64 = dt.as_f64();
    let sqrt_dt = dt64.sqrt();
    let margin = -cfg.safety_margin.as_f64();
    let max_steps = cfg.max_steps();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut eval = |y: &[T]| field.command(y);

    let mut x = ic.as_slice().to_vec();
    let mut occupancy = vec![0.0; env.obstacles.len()];
    let mut min_h = f64::INFINITY;
    let mut path_length = 0.0;
    let mut max_control: f64 = 0.0;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut controls = Vec::new();

    let h_values = |y: &[T]| -> Vec<f64> {
        env.obstacles
            .iter()
            .map(|o| o.h.value_unchecked(y, mode).as_f64())
            .collect()
    };
    let near = |y: &[T]| env.distance_to_target(y) <= cfg.converge_radius;

    let mut step = 0usize;
    let outcome = loop {
        let hv = h_values(&x);
        let hmin = hv.iter().cloned().fold(f64::INFINITY, f64::min);
        min_h = min_h.min(hmin);
        if step > 0 {
            for (acc, &h) in occupancy.iter_mut().zip(&hv) {
                if h <= 0.0 {
                    *acc += dt64;
                }
            }
        }
        let t = T::from_usize(step).unwrap() * dt;
        let state_bad = x.iter().any(|c| !c.is_finite());
        let entered = !state_bad && step > 0 && hmin < margin && cfg.terminate_on_unsafe;
        let u = if state_bad || entered {
            vec![T::zero(); n]
        } else {
            match eval(&x) {
                Ok(u) => u,
                // grad rho refuses only within ~1e-6 of the target
                Err(Error::NearTarget { .. }) => vec![T::zero(); n],
                Err(_) => break Outcome::NumericalFailure,
            }
        };
        max_control = max_control.max(u.iter().fold(0.0, |a, c| a.max(c.as_f64().abs())));
        let stop = if state_bad || u.iter().any(|c| !c.is_finite()) {
            Some(Outcome::NumericalFailure)
        } else if entered {
            Some(Outcome::UnsafeEntered)
        } else if near(&x) {
            Some(Outcome::Converged)
        } else if step >= max_steps {
            Some(Outcome::MaxTime)
        } else {
            None
        };
        if stop.is_some() || step % cfg.record_stride == 0 {
            times.push(t);
            states.push(StateVector::from(x.clone()));
            controls.push(u.clone());
        }
        if let Some(o) = stop {
            break o;
        }

        let mut next = match cfg.method {
            Method::Rk4 => match rk4_slice(&mut eval, &x, dt) {
                Ok(v) => v,
                Err(_) => break Outcome::NumericalFailure,
            },
            Method::Euler => x.iter().zip(&u).map(|(&a, &b)| a + dt * b).collect(),
        };
        if let Some(nm) = opts.noise {
            let w = nm.sample(&mut rng);
            for (c, wi) in next.iter_mut().zip(&w) {
                *c = *c + T::lit(sqrt_dt * wi);
            }
        }
        let dx: f64 = x
            .iter()
            .zip(&next)
            .map(|(&a, &b)| mode.diff(b, a).as_f64().powi(2))
            .sum::<f64>()
            .sqrt();
        path_length += dx;
        wrap_state(&mut next, mode);
        x = next;
        step += 1;
    };

    let final_time = times.last().map(|t| t.as_f64()).unwrap_or(0.0);
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
        steps: step,
        max_control,
    })
}
