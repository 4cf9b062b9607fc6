//! Navigation density `rho(x) = prod_k Psi_k(x) / V(x)^alpha`, its exact
//! gradient, and the Monte Carlo estimate of the admissible floor `theta`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Environment, GeometryMode, StateVector};
use crate::scalar::Scalar;
use crate::smoothing::psi_with_grad;

/// `V` and `grad V` closer to zero than this are treated as the target itself.
pub const TARGET_REFUSAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    /// `|x - target|^2`
    #[default]
    SquaredEuclidean,
    /// `sum_i 2 (1 - cos(x_i - target_i))`, zero only at the target on the
    /// torus and equal to `|x - target|^2` to second order.
    TrigonometricJoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams<T> {
    pub alpha: T,
    pub theta: T,
    pub distance: DistanceKind,
}

impl<T: Scalar> DensityParams<T> {
    pub fn new(alpha: T, theta: T, distance: DistanceKind) -> Result<Self> {
        if !(alpha.is_finite() && alpha > T::zero()) {
            return Err(invalid("alpha", "must be > 0"));
        }
        if !(theta.is_finite() && theta > T::zero()) {
            return Err(invalid("theta", "must be > 0"));
        }
        Ok(Self {
            alpha,
            theta,
            distance,
        })
    }
}

impl<T: Scalar> Default for DensityParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(4.0),
            theta: T::lit(0.01),
            distance: DistanceKind::SquaredEuclidean,
        }
    }
}

/// Distance-to-target function `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceFn<T> {
    pub kind: DistanceKind,
    pub target: StateVector<T>,
    pub mode: GeometryMode,
}

impl<T: Scalar> DistanceFn<T> {
    pub fn new(kind: DistanceKind, target: StateVector<T>, mode: GeometryMode) -> Self {
        Self { kind, target, mode }
    }

    pub fn for_env(env: &Environment<T>, kind: DistanceKind) -> Self {
        Self::new(kind, env.target.clone(), env.mode)
    }

    pub fn value(&self, x: &StateVector<T>) -> Result<T> {
        x.check_dim(self.target.dim())?;
        Ok(self.value_unchecked(x.as_slice()))
    }

    pub fn grad(&self, x: &StateVector<T>) -> Result<StateVector<T>> {
        x.check_dim(self.target.dim())?;
        Ok(self.grad_unchecked(x.as_slice()).into())
    }

    pub(crate) fn value_unchecked(&self, x: &[T]) -> T {
        let t = self.target.as_slice();
        match self.kind {
            DistanceKind::SquaredEuclidean => x
                .iter()
                .zip(t)
                .map(|(&a, &b)| self.mode.diff(a, b))
                .fold(T::zero(), |acc, d| acc + d * d),
            DistanceKind::TrigonometricJoint => {
                let two = T::lit(2.0);
                x.iter()
                    .zip(t)
                    .fold(T::zero(), |acc, (&a, &b)| acc + two * (T::one() - (a - b).cos()))
            }
        }
    }

    pub(crate) fn grad_unchecked(&self, x: &[T]) -> Vec<T> {
        let t = self.target.as_slice();
        let two = T::lit(2.0);
        match self.kind {
            DistanceKind::SquaredEuclidean => x
                .iter()
                .zip(t)
                .map(|(&a, &b)| two * self.mode.diff(a, b))
                .collect(),
            DistanceKind::TrigonometricJoint => x
                .iter()
                .zip(t)
                .map(|(&a, &b)| two * (a - b).sin())
                .collect(),
        }
    }
}

/// The navigation density of an environment.
#[derive(Debug, Clone)]
pub struct Density<'a, T> {
    pub env: &'a Environment<T>,
    pub params: DensityParams<T>,
    pub distance: DistanceFn<T>,
}

impl<'a, T: Scalar> Density<'a, T> {
    pub fn new(env: &'a Environment<T>, params: DensityParams<T>) -> Self {
        let distance = DistanceFn::for_env(env, params.distance);
        Self {
            env,
            params,
            distance,
        }
    }

    pub fn dim(&self) -> usize {
        self.env.dim()
    }

    fn checked_v(&self, x: &[T]) -> Result<T> {
        let v = self.distance.value_unchecked(x);
        if !(v > T::lit(TARGET_REFUSAL)) {
            return Err(Error::NearTarget {
                distance: v.abs().sqrt().as_f64(),
            });
        }
        Ok(v)
    }

    /// Product of all `Psi_k` at `x`.
    pub fn psi_product(&self, x: &[T]) -> T {
        self.env
            .obstacles
            .iter()
            .map(|o| psi_with_grad(o, self.params.theta, x, self.env.mode).0)
            .fold(T::one(), |a, b| a * b)
    }

    pub fn rho(&self, x: &StateVector<T>) -> Result<T> {
        x.check_dim(self.dim())?;
        self.rho_unchecked(x.as_slice())
    }

    pub(crate) fn rho_unchecked(&self, x: &[T]) -> Result<T> {
        let v = self.checked_v(x)?;
        Ok(self.psi_product(x) * (-self.params.alpha * v.ln()).exp())
    }

    /// `grad rho = V^-a (sum_k grad Psi_k prod_{j != k} Psi_j - a Psi grad V / V)`.
    pub fn grad_rho(&self, x: &StateVector<T>) -> Result<StateVector<T>> {
        x.check_dim(self.dim())?;
        self.grad_rho_unchecked(x.as_slice()).map(StateVector::from)
    }

    pub(crate) fn grad_rho_unchecked(&self, x: &[T]) -> Result<Vec<T>> {
        let v = self.checked_v(x)?;
        let n = x.len();
        let alpha = self.params.alpha;
        let parts: Vec<(T, Option<Vec<T>>)> = self
            .env
            .obstacles
            .iter()
            .map(|o| psi_with_grad(o, self.params.theta, x, self.env.mode))
            .collect();
        let psi = parts.iter().fold(T::one(), |a, (p, _)| a * *p);

        let mut grad_psi = vec![T::zero(); n];
        for (pk, gk) in &parts {
            if let Some(gk) = gk {
                let others = psi / *pk;
                for (acc, &g) in grad_psi.iter_mut().zip(gk) {
                    *acc = *acc + g * others;
                }
            }
        }
        let gv = self.distance.grad_unchecked(x);
        let scale = (-alpha * v.ln()).exp();
        let k = alpha * psi / v;
        Ok(grad_psi
            .iter()
            .zip(&gv)
            .map(|(&gp, &g)| scale * (gp - k * g))
            .collect())
    }
}

/// Monte Carlo estimate of the largest admissible `theta` for one obstacle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaBound {
    pub theta_max: f64,
    pub epsilon: f64,
    /// Sampled minimum of `V` over the unsafe set.
    pub v_min: f64,
    /// Estimated Lebesgue measure of the unsafe set.
    pub measure: f64,
    pub measure_std_err: f64,
    pub hits: usize,
    pub samples: usize,
    /// `V_min` indistinguishable from zero: the unsafe set touches the target.
    pub touches_target: bool,
}

/// `theta_max = epsilon * V_min / m(X_u)` with both quantities estimated
/// from `samples` uniform draws in the domain box.
pub fn theta_bound<T: Scalar>(
    env: &Environment<T>,
    distance: DistanceKind,
    obstacle_index: usize,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<ThetaBound> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid("epsilon", "must be > 0"));
    }
    let obstacle = env
        .obstacles
        .get(obstacle_index)
        .ok_or_else(|| invalid("obstacle_index", "out of range"))?;
    let dist = DistanceFn::for_env(env, distance);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut v_min = f64::INFINITY;
    for _ in 0..samples {
        let x = env.domain.sample(&mut rng);
        if obstacle.h.value_unchecked(x.as_slice(), env.mode) <= T::zero() {
            hits += 1;
            v_min = v_min.min(dist.value_unchecked(x.as_slice()).as_f64());
        }
    }
    if hits == 0 {
        return Err(Error::EstimationFailed(format!(
            "no sample out of {samples} fell in the unsafe set of obstacle {obstacle_index}"
        )));
    }
    let vol = env.domain.volume().as_f64();
    let p = hits as f64 / samples as f64;
    let measure = p * vol;
    let measure_std_err = vol * (p * (1.0 - p) / samples as f64).sqrt();
    let touches_target = v_min <= TARGET_REFUSAL;
    let theta_max = if touches_target {
        0.0
    } else {
        epsilon * v_min / measure
    };
    Ok(ThetaBound {
        theta_max,
        epsilon,
        v_min,
        measure,
        measure_std_err,
        hits,
        samples,
        touches_target,
    })
}
