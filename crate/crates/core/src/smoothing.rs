//! C-infinity bump machinery: the elementary function `f`, the smooth step
//! `f_bar`, the inverse bump `Phi_k` of an obstacle and its shifted form
//! `Psi_k = Phi_k + theta`.

use crate::error::{invalid, Error, Result};
use crate::geometry::{GeometryMode, Obstacle, StateVector};
use crate::scalar::Scalar;

/// `exp(-1/tau)` for `tau > 0`, else `0`.
///
/// The exponent is compared against `ln(MIN_POSITIVE)` first, so tiny
/// positive `tau` flushes to zero instead of forming an overflowing
/// reciprocal.
pub fn elementary_f<T: Scalar>(tau: T) -> T {
    if !(tau > T::zero()) {
        return T::zero();
    }
    let floor = T::min_positive_value().ln();
    // -1/tau < floor  <=>  tau < -1/floor  (floor < 0)
    if tau < -T::one() / floor {
        return T::zero();
    }
    (-T::one() / tau).exp()
}

/// `f(tau) / (f(tau) + f(1 - tau))`: 0 for `tau <= 0`, 1 for `tau >= 1`.
pub fn smooth_step<T: Scalar>(tau: T) -> T {
    if tau <= T::zero() {
        return T::zero();
    }
    if tau >= T::one() {
        return T::one();
    }
    let a = elementary_f(tau);
    let b = elementary_f(T::one() - tau);
    a / (a + b)
}

/// Derivative of [`smooth_step`].
///
/// With `g = f_bar(tau)`: `g' = g (1 - g) (1/tau^2 + 1/(1 - tau)^2)`.
pub fn smooth_step_deriv<T: Scalar>(tau: T) -> T {
    if tau <= T::zero() || tau >= T::one() {
        return T::zero();
    }
    let g = smooth_step(tau);
    let u = T::one() - tau;
    g * (T::one() - g) * (T::one() / (tau * tau) + T::one() / (u * u))
}

/// `tau_k(x) = h / (h - s)` and its gradient `(h grad s - s grad h) / (h - s)^2`.
fn transition_coordinate<T: Scalar>(
    obstacle: &Obstacle<T>,
    x: &[T],
    mode: GeometryMode,
    h: T,
    s: T,
) -> Result<(T, Vec<T>)> {
    let gap = h - s;
    if !(gap > T::zero()) {
        return Err(Error::MalformedObstacle { gap: gap.as_f64() });
    }
    let gh = obstacle.h.grad_unchecked(x, mode);
    let gs = obstacle.s.grad_unchecked(x, mode);
    let inv = T::one() / (gap * gap);
    let grad = gh
        .iter()
        .zip(&gs)
        .map(|(&dh, &ds)| (h * ds - s * dh) * inv)
        .collect();
    Ok((h / gap, grad))
}

/// Change of variables `phi_k(x) = f_bar(h / (h - s))`, valid on the sensing
/// closure. Fails when `h - s <= 0`.
pub fn phi<T: Scalar>(obstacle: &Obstacle<T>, x: &StateVector<T>, mode: GeometryMode) -> Result<T> {
    x.check_dim(obstacle.dim())?;
    let xs = x.as_slice();
    let h = obstacle.h.value_unchecked(xs, mode);
    let s = obstacle.s.value_unchecked(xs, mode);
    let gap = h - s;
    if !(gap > T::zero()) {
        return Err(Error::MalformedObstacle { gap: gap.as_f64() });
    }
    Ok(smooth_step(h / gap))
}

/// Inverse bump `Phi_k`: 0 on the unsafe set, `phi_k` on the sensing
/// region, 1 elsewhere.
///
/// The sensing branch is only taken where `h > 0 >= s`, so `h - s > 0`
/// there and this never fails on a dimension-correct input.
pub fn inverse_bump<T: Scalar>(
    obstacle: &Obstacle<T>,
    x: &StateVector<T>,
    mode: GeometryMode,
) -> Result<T> {
    x.check_dim(obstacle.dim())?;
    Ok(inverse_bump_unchecked(obstacle, x.as_slice(), mode))
}

pub(crate) fn inverse_bump_unchecked<T: Scalar>(
    obstacle: &Obstacle<T>,
    x: &[T],
    mode: GeometryMode,
) -> T {
    let h = obstacle.h.value_unchecked(x, mode);
    if h <= T::zero() {
        return T::zero();
    }
    let s = obstacle.s.value_unchecked(x, mode);
    if s > T::zero() {
        return T::one();
    }
    smooth_step(h / (h - s))
}

/// `Psi_k` for one obstacle with floor `theta > 0`.
#[derive(Debug, Clone, Copy)]
pub struct BumpSpec<'a, T> {
    pub obstacle: &'a Obstacle<T>,
    pub theta: T,
}

impl<'a, T: Scalar> BumpSpec<'a, T> {
    pub fn new(obstacle: &'a Obstacle<T>, theta: T) -> Result<Self> {
        if !(theta.is_finite() && theta > T::zero()) {
            return Err(invalid("theta", "must be > 0"));
        }
        Ok(Self { obstacle, theta })
    }

    /// `Phi_k(x) + theta`, in `[theta, 1 + theta]`.
    pub fn psi(&self, x: &StateVector<T>, mode: GeometryMode) -> Result<T> {
        Ok(inverse_bump(self.obstacle, x, mode)? + self.theta)
    }

    /// Analytic gradient of `Psi_k`; exactly zero off the open sensing region.
    pub fn grad_psi(&self, x: &StateVector<T>, mode: GeometryMode) -> Result<StateVector<T>> {
        x.check_dim(self.obstacle.dim())?;
        let (_, g) = psi_with_grad(self.obstacle, self.theta, x.as_slice(), mode);
        Ok(g.map(StateVector::from)
            .unwrap_or_else(|| StateVector::zeros(x.dim())))
    }
}

/// `(Psi_k, grad Psi_k)`, the gradient being `None` on the flat branches.
pub(crate) fn psi_with_grad<T: Scalar>(
    obstacle: &Obstacle<T>,
    theta: T,
    x: &[T],
    mode: GeometryMode,
) -> (T, Option<Vec<T>>) {
    let h = obstacle.h.value_unchecked(x, mode);
    if h <= T::zero() {
        return (theta, None);
    }
    let s = obstacle.s.value_unchecked(x, mode);
    if s > T::zero() {
        return (T::one() + theta, None);
    }
    // h > 0 >= s, so h - s > 0.
    let (tau, dtau) = transition_coordinate(obstacle, x, mode, h, s)
        .expect("sensing branch has h - s > 0");
    let slope = smooth_step_deriv(tau);
    let grad = dtau.into_iter().map(|d| slope * d).collect();
    (smooth_step(tau) + theta, Some(grad))
}
