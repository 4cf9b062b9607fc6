//! Feedback laws built on the density: raw gradient ascent, the blend with
//! a linear stabilizer near the target, saturation and additive Gaussian
//! actuation noise.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::density::Density;
use crate::error::{invalid, Result};
use crate::geometry::StateVector;
use crate::scalar::Scalar;
use crate::smoothing::smooth_step;

/// Anything that maps a state to a velocity command.
pub trait FeedbackField<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn command(&self, x: &[T]) -> Result<Vec<T>>;
}

/// Gaussian noise `w ~ N(mean, cov)` sampled as `mean + L z`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
}

impl NoiseModel {
    /// Full covariance; must be symmetric positive semidefinite.
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let n = mean.len();
        if n == 0 || cov.len() != n || cov.iter().any(|r| r.len() != n) {
            return Err(invalid("noise.cov", format!("must be {n}x{n}")));
        }
        if mean.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(invalid("noise", "non-finite entry"));
        }
        for i in 0..n {
            for j in 0..i {
                let tol = 1e-12 * (cov[i][j].abs() + cov[j][i].abs()).max(1.0);
                if (cov[i][j] - cov[j][i]).abs() > tol {
                    return Err(invalid("noise.cov", "not symmetric"));
                }
            }
        }
        let chol = psd_cholesky(&cov)?;
        Ok(Self { mean, cov, chol })
    }

    pub fn diagonal(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let n = variances.len();
        let cov = (0..n)
            .map(|i| (0..n).map(|j| if i == j { variances[i] } else { 0.0 }).collect())
            .collect();
        Self::new(mean, cov)
    }

    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        Self::diagonal(vec![0.0; dim], vec![variance; dim])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.chol.iter().flatten().all(|&v| v == 0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.mean
            .iter()
            .zip(&self.chol)
            .map(|(m, row)| m + row.iter().zip(&z).map(|(l, zi)| l * zi).sum::<f64>())
            .collect()
    }
}

/// Lower-triangular `L` with `L L^T = a`, tolerating zero pivots.
fn psd_cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -tol {
            return Err(invalid("noise.cov", "not positive semidefinite"));
        }
        if d <= tol {
            for i in j + 1..n {
                let r = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if r.abs() > 1e-9 * scale.sqrt() {
                    return Err(invalid("noise.cov", "not positive semidefinite"));
                }
            }
            continue;
        }
        let piv = d.sqrt();
        l[j][j] = piv;
        for i in j + 1..n {
            let r = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = r / piv;
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig<T> {
    pub blend_delta: T,
    pub u_max: Option<T>,
    /// Additive white noise; each run draws from its own seed.
    pub noise: Option<NoiseModel>,
}

impl<T: Scalar> ControllerConfig<T> {
    pub fn new(blend_delta: T) -> Result<Self> {
        if !(blend_delta.is_finite() && blend_delta > T::zero()) {
            return Err(invalid("blend_delta", "must be > 0"));
        }
        Ok(Self {
            blend_delta,
            u_max: None,
            noise: None,
        })
    }

    pub fn with_u_max(mut self, u_max: T) -> Result<Self> {
        if !(u_max.is_finite() && u_max > T::zero()) {
            return Err(invalid("u_max", "must be > 0"));
        }
        self.u_max = Some(u_max);
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = Some(noise);
        self
    }
}

/// `k(x) = grad rho(x)`.
pub fn gradient_control<T: Scalar>(density: &Density<'_, T>, x: &StateVector<T>) -> Result<StateVector<T>> {
    density.grad_rho(x)
}

/// `(1 - w) grad rho(x) - w (x - target)` with `w = f_bar(2 - 2|x - target|/delta)`.
pub fn blended_control<T: Scalar>(
    density: &Density<'_, T>,
    delta: T,
    x: &StateVector<T>,
) -> Result<StateVector<T>> {
    x.check_dim(density.dim())?;
    blended_unchecked(density, delta, x.as_slice()).map(StateVector::from)
}

pub(crate) fn blended_unchecked<T: Scalar>(density: &Density<'_, T>, delta: T, x: &[T]) -> Result<Vec<T>> {
    let offset = density.env.offset_from_target(x).into_inner();
    let r = offset.iter().fold(T::zero(), |a, &d| a + d * d).sqrt();
    let two = T::lit(2.0);
    let w = smooth_step(two - two * r / delta);
    if w >= T::one() {
        return Ok(offset.into_iter().map(|d| -d).collect());
    }
    let g = density.grad_rho_unchecked(x)?;
    if w <= T::zero() {
        return Ok(g);
    }
    Ok(g.iter()
        .zip(&offset)
        .map(|(&gi, &di)| (T::one() - w) * gi - w * di)
        .collect())
}

/// Scale `u` so `|u|_inf <= u_max`, preserving direction.
pub fn saturate<T: Scalar>(u: &StateVector<T>, u_max: T) -> StateVector<T> {
    let mut v = u.as_slice().to_vec();
    saturate_in_place(&mut v, u_max);
    v.into()
}

pub(crate) fn saturate_in_place<T: Scalar>(u: &mut [T], u_max: T) {
    let m = u.iter().fold(T::zero(), |a, &c| a.max(c.abs()));
    if m > u_max {
        let k = u_max / m;
        for c in u.iter_mut() {
            *c = *c * k;
            // keep the bound exact under rounding
            if c.abs() > u_max {
                *c = u_max.copysign(*c);
            }
        }
    }
}

/// `u + w` with `w` drawn from `noise`.
pub fn add_noise<T: Scalar, R: Rng + ?Sized>(
    u: &StateVector<T>,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<StateVector<T>> {
    u.check_dim(noise.dim())?;
    let w = noise.sample(rng);
    Ok(u.iter().zip(&w).map(|(&ui, &wi)| ui + T::lit(wi)).collect::<Vec<_>>().into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlLaw {
    Gradient,
    #[default]
    Blended,
}

/// Density controller: chosen law followed by optional saturation.
#[derive(Debug, Clone)]
pub struct DensityController<'a, T> {
    pub density: Density<'a, T>,
    pub config: ControllerConfig<T>,
    pub law: ControlLaw,
}

impl<'a, T: Scalar> DensityController<'a, T> {
    pub fn new(density: Density<'a, T>, config: ControllerConfig<T>, law: ControlLaw) -> Self {
        Self {
            density,
            config,
            law,
        }
    }
}

impl<T: Scalar> FeedbackField<T> for DensityController<'_, T> {
    fn dim(&self) -> usize {
        self.density.dim()
    }

    fn command(&self, x: &[T]) -> Result<Vec<T>> {
        let mut u = match self.law {
            ControlLaw::Gradient => self.density.grad_rho_unchecked(x)?,
            ControlLaw::Blended => blended_unchecked(&self.density, self.config.blend_delta, x)?,
        };
        if let Some(m) = self.config.u_max {
            saturate_in_place(&mut u, m);
        }
        Ok(u)
    }
}
