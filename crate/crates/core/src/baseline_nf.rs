//! Navigation-function baseline on sphere worlds,
//! `psi = d^2 / (d^2 + beta^(1/kappa))`, and the cavity comparison against
//! density controllers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::{ControlLaw, ControllerConfig, DensityController, FeedbackField};
use crate::density::{Density, DensityParams};
use crate::dynamics::{simulate_integrator, IntegratorConfig, Outcome, SimOptions, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::geometry::{DomainBox, Environment, GeometryMode, ImplicitFn, ImplicitKind, Obstacle, StateVector};
use crate::scalar::Scalar;

/// Bounded disc world with disc obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereWorld<T> {
    pub outer_radius: T,
    pub goal: StateVector<T>,
    pub obstacles: Vec<(Vec<T>, T)>,
    pub kappa: T,
}

impl<T: Scalar> SphereWorld<T> {
    /// Requires obstacles strictly inside the outer sphere, pairwise
    /// disjoint, and the goal in free space.
    pub fn new(outer_radius: T, goal: StateVector<T>, obstacles: Vec<(Vec<T>, T)>, kappa: T) -> Result<Self> {
        let w = Self::with_overlaps(outer_radius, goal, obstacles, kappa)?;
        if let Some((i, j)) = w.first_overlap() {
            return Err(invalid("obstacles", format!("discs {i} and {j} intersect")));
        }
        Ok(w)
    }

    /// As [`SphereWorld::new`] but accepting intersecting discs, for
    /// approximating a non-spherical obstacle by a disc union.
    pub fn with_overlaps(outer_radius: T, goal: StateVector<T>, obstacles: Vec<(Vec<T>, T)>, kappa: T) -> Result<Self> {
        if !(outer_radius.is_finite() && outer_radius > T::zero()) {
            return Err(invalid("outer_radius", "must be > 0"));
        }
        if !(kappa.is_finite() && kappa >= T::one()) {
            return Err(invalid("kappa", "must be >= 1"));
        }
        let n = goal.dim();
        for (k, (c, r)) in obstacles.iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.len(),
                });
            }
            if !(r.is_finite() && *r > T::zero()) {
                return Err(invalid("radius", format!("disc {k} must have radius > 0")));
            }
            let cn = c.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
            if cn + *r >= outer_radius {
                return Err(invalid("obstacles", format!("disc {k} not inside the outer sphere")));
            }
        }
        let w = Self {
            outer_radius,
            goal,
            obstacles,
            kappa,
        };
        if w.betas(w.goal.as_slice()).iter().any(|b| *b <= T::zero()) {
            return Err(invalid("goal", "not in free space"));
        }
        Ok(w)
    }

    pub fn dim(&self) -> usize {
        self.goal.dim()
    }

    pub fn with_kappa(&self, kappa: T) -> Result<Self> {
        Self::with_overlaps(self.outer_radius, self.goal.clone(), self.obstacles.clone(), kappa)
    }

    pub fn first_overlap(&self) -> Option<(usize, usize)> {
        for i in 0..self.obstacles.len() {
            for j in i + 1..self.obstacles.len() {
                let (ci, ri) = &self.obstacles[i];
                let (cj, rj) = &self.obstacles[j];
                let d = ci
                    .iter()
                    .zip(cj)
                    .fold(T::zero(), |a, (&p, &q)| a + (p - q) * (p - q))
                    .sqrt();
                if d <= *ri + *rj {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// `[beta_0, beta_1, ...]` with `beta_0 = R0^2 - |x|^2`, `beta_k = |x - c_k|^2 - r_k^2`.
    fn betas(&self, x: &[T]) -> Vec<T> {
        let sq = |v: &[T], c: Option<&[T]>| -> T {
            v.iter()
                .enumerate()
                .fold(T::zero(), |a, (i, &xi)| {
                    let d = xi - c.map_or(T::zero(), |c| c[i]);
                    a + d * d
                })
        };
        let mut out = Vec::with_capacity(self.obstacles.len() + 1);
        out.push(self.outer_radius * self.outer_radius - sq(x, None));
        for (c, r) in &self.obstacles {
            out.push(sq(x, Some(c)) - *r * *r);
        }
        out
    }

    fn check_free(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let b = self.betas(x);
        if b[0] < T::zero() {
            return Err(Error::OutsideDomain("outside the outer sphere".into()));
        }
        if let Some(k) = b[1..].iter().position(|v| *v < T::zero()) {
            return Err(Error::OutsideDomain(format!("inside disc {k}")));
        }
        Ok(b)
    }

    fn goal_sq(&self, x: &[T]) -> (T, Vec<T>) {
        let d: Vec<T> = x.iter().zip(self.goal.iter()).map(|(&a, &g)| a - g).collect();
        (d.iter().fold(T::zero(), |a, &v| a + v * v), d)
    }

    /// `beta^(1/kappa)`, through logarithms to avoid overflow in long products.
    fn b_root(&self, betas: &[T]) -> T {
        if betas.iter().any(|b| *b <= T::zero()) {
            return T::zero();
        }
        (betas.iter().fold(T::zero(), |a, b| a + b.ln()) / self.kappa).exp()
    }

    pub fn nf_value(&self, x: &StateVector<T>) -> Result<T> {
        let b = self.check_free(x.as_slice())?;
        let (d2, _) = self.goal_sq(x.as_slice());
        let br = self.b_root(&b);
        if d2 + br == T::zero() {
            return Ok(T::zero());
        }
        Ok(d2 / (d2 + br))
    }

    pub fn nf_grad(&self, x: &StateVector<T>) -> Result<StateVector<T>> {
        let b = self.check_free(x.as_slice())?;
        Ok(self.grad_unchecked(x.as_slice(), &b).into())
    }

    fn grad_unchecked(&self, x: &[T], betas: &[T]) -> Vec<T> {
        let n = x.len();
        let two = T::lit(2.0);
        let (d2, d) = self.goal_sq(x);
        let br = self.b_root(betas);
        let den = d2 + br;
        if den == T::zero() {
            return vec![T::zero(); n];
        }
        // grad b = (b / kappa) sum_i grad beta_i / beta_i
        let mut gb = vec![T::zero(); n];
        if br > T::zero() {
            for (i, c) in std::iter::once(None)
                .chain(self.obstacles.iter().map(|(c, _)| Some(c)))
                .enumerate()
            {
                let inv = T::one() / betas[i];
                for j in 0..n {
                    let g = match c {
                        None => -two * x[j],
                        Some(c) => two * (x[j] - c[j]),
                    };
                    gb[j] = gb[j] + g * inv;
                }
            }
            let k = br / self.kappa;
            for v in gb.iter_mut() {
                *v = *v * k;
            }
        }
        let inv = T::one() / (den * den);
        (0..n)
            .map(|j| (br * two * d[j] - d2 * gb[j]) * inv)
            .collect()
    }

    /// `-grad psi`.
    pub fn nf_control(&self, x: &StateVector<T>) -> Result<StateVector<T>> {
        Ok(self.nf_grad(x)?.scale(-T::one()))
    }

    /// Environment for simulation bookkeeping: each disc is an obstacle
    /// with a thin sensing band, the domain is the box around the outer sphere.
    pub fn to_environment(&self, delta: T) -> Result<Environment<T>> {
        let n = self.dim();
        let obstacles = self
            .obstacles
            .iter()
            .enumerate()
            .map(|(k, (c, r))| {
                Obstacle::new(
                    ImplicitFn::sphere(c.clone(), *r)?,
                    ImplicitFn::sphere(c.clone(), *r * T::lit(1.01))?,
                    format!("disc_{k}"),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Environment::new(
            self.goal.clone(),
            obstacles,
            DomainBox::new(vec![-self.outer_radius; n], vec![self.outer_radius; n])?,
            delta,
            GeometryMode::Euclidean,
        )
    }
}

/// Discs centred at `centers` whose union contains every grid point of
/// `{h <= 0}` inside `lo..hi`; each point is assigned to its nearest centre
/// and radii are padded by half a cell diagonal.
pub fn cover_with_discs<T: Scalar>(
    h: &ImplicitFn<T>,
    lo: [T; 2],
    hi: [T; 2],
    resolution: usize,
    centers: &[[T; 2]],
) -> Result<Vec<(Vec<T>, T)>> {
    if centers.is_empty() {
        return Err(invalid("centers", "at least one disc is required"));
    }
    if resolution < 2 {
        return Err(invalid("resolution", "must be >= 2"));
    }
    let n = T::from_usize(resolution).unwrap();
    let step = [(hi[0] - lo[0]) / n, (hi[1] - lo[1]) / n];
    let pad = (step[0] * step[0] + step[1] * step[1]).sqrt() / T::lit(2.0);
    let mut radii = vec![T::zero(); centers.len()];
    let mut any = false;
    for i in 0..resolution {
        for j in 0..resolution {
            let x = [
                lo[0] + (T::from_usize(i).unwrap() + T::lit(0.5)) * step[0],
                lo[1] + (T::from_usize(j).unwrap() + T::lit(0.5)) * step[1],
            ];
            if h.value_unchecked(&x, GeometryMode::Euclidean) > T::zero() {
                continue;
            }
            any = true;
            let (k, d) = centers
                .iter()
                .map(|c| ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt())
                .enumerate()
                .fold((0, T::infinity()), |(bk, bd), (k, d)| if d < bd { (k, d) } else { (bk, bd) });
            radii[k] = radii[k].max(d + pad);
        }
    }
    if !any {
        return Err(invalid("h", "no grid point inside the unsafe set"));
    }
    Ok(centers
        .iter()
        .zip(radii)
        .filter(|(_, r)| *r > T::zero())
        .map(|(c, r)| (c.to_vec(), r))
        .collect())
}

/// `xdot = -grad psi` as a feedback field; points outside the free space
/// are reported as errors, which the integrator records as failures.
#[derive(Debug, Clone)]
pub struct NfController<T> {
    pub world: SphereWorld<T>,
}

impl<T: Scalar> FeedbackField<T> for NfController<T> {
    fn dim(&self) -> usize {
        self.world.dim()
    }

    fn command(&self, x: &[T]) -> Result<Vec<T>> {
        let b = self.world.check_free(x)?;
        Ok(self.world.grad_unchecked(x, &b).into_iter().map(|v| -v).collect())
    }
}

/// Cavity comparison problem: one C-shaped unsafe set, a family of
/// skewed-oval sensing boundaries, and a disc-union stand-in for the NF.
#[derive(Debug, Clone)]
pub struct ComparisonSetup<T> {
    pub target: StateVector<T>,
    pub unsafe_set: ImplicitFn<T>,
    /// Sensing boundary template; its `radius` is replaced per run.
    pub sensing: ImplicitFn<T>,
    pub domain: DomainBox<T>,
    pub delta: T,
    pub density: DensityParams<T>,
    pub controller: ControllerConfig<T>,
    pub integrator: IntegratorConfig<T>,
    pub world: SphereWorld<T>,
}

impl<T: Scalar> ComparisonSetup<T> {
    pub fn density_environment(&self, sensing_radius: T) -> Result<Environment<T>> {
        let kind = match &self.sensing.kind {
            ImplicitKind::SkewedOval { center, a, b, c, .. } => ImplicitKind::SkewedOval {
                center: center.clone(),
                a: *a,
                b: *b,
                c: *c,
                radius: sensing_radius,
            },
            ImplicitKind::Sphere { center, .. } => ImplicitKind::Sphere {
                center: center.clone(),
                radius: sensing_radius,
            },
            _ => return Err(invalid("sensing", "must be a skewed oval or a sphere")),
        };
        let s = ImplicitFn::new(kind)?;
        Environment::new(
            self.target.clone(),
            vec![Obstacle::new(self.unsafe_set.clone(), s, "c_shape")?],
            self.domain.clone(),
            self.delta,
            GeometryMode::Euclidean,
        )
    }
    /// `count` points drawn uniformly from the disc `(center, radius)`,
    /// keeping only points outside the unsafe set, outside every NF disc
    /// and farther than `delta` from the target.
    pub fn sample_cavity(&self, center: [T; 2], radius: T, count: usize, seed: u64) -> Result<Vec<StateVector<T>>> {
        if !(radius.is_finite() && radius > T::zero()) {
            return Err(invalid("radius", "must be > 0"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut tries = 0usize;
        while out.len() < count {
            tries += 1;
            if tries > 10_000 * count.max(1) {
                return Err(Error::EstimationFailed("cavity region too small to sample".into()));
            }
            let u = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if u[0] * u[0] + u[1] * u[1] > 1.0 {
                continue;
            }
            let x = [center[0] + radius * T::lit(u[0]), center[1] + radius * T::lit(u[1])];
            if self.unsafe_set.value_unchecked(&x, GeometryMode::Euclidean) <= T::zero()
                || self.world.check_free(&x).is_err()
            {
                continue;
            }
            let t = self.target.as_slice();
            if ((x[0] - t[0]).powi(2) + (x[1] - t[1]).powi(2)).sqrt() <= self.delta {
                continue;
            }
            out.push(StateVector::from(x.to_vec()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Density,
    Nf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: Method,
    /// Sensing radius for density rows, kappa for NF rows.
    pub parameter: f64,
    pub runs: usize,
    pub converged: usize,
    /// Runs still moving or stalled at the time limit.
    pub trapped: usize,
    pub unsafe_entered: usize,
    /// Numerical failures and rejected initial conditions.
    pub failed: usize,
    pub fraction_converged: f64,
    pub fraction_trapped: f64,
    pub mean_path_length: f64,
    pub outcomes: Vec<Option<Outcome>>,
}

#[derive(Debug, Clone)]
pub struct ComparisonResult<T> {
    pub rows: Vec<ComparisonRow>,
    /// Trajectories per row, in initial-condition order.
    pub trajectories: Vec<Vec<Option<Trajectory<T>>>>,
}

fn summarize<T: Scalar>(method: Method, parameter: f64, runs: &[Option<Trajectory<T>>]) -> ComparisonRow {
    let count = |o: Outcome| runs.iter().flatten().filter(|t| t.outcome == o).count();
    let converged = count(Outcome::Converged);
    let trapped = count(Outcome::MaxTime);
    let unsafe_entered = count(Outcome::UnsafeEntered);
    let failed = runs.len() - converged - trapped - unsafe_entered;
    let n = runs.len().max(1) as f64;
    let lengths: crate::scalar::CompensatedSum = runs.iter().flatten().map(|t| t.path_length).collect();
    let finished = runs.iter().flatten().count();
    ComparisonRow {
        method,
        parameter,
        runs: runs.len(),
        converged,
        trapped,
        unsafe_entered,
        failed,
        fraction_converged: converged as f64 / n,
        fraction_trapped: trapped as f64 / n,
        mean_path_length: if finished == 0 { 0.0 } else { lengths.value() / finished as f64 },
        outcomes: runs.iter().map(|t| t.as_ref().map(|t| t.outcome)).collect(),
    }
}

/// Run every initial condition under the density controller for each
/// sensing radius and under NF descent for each kappa.
pub fn run_comparison<T: Scalar>(
    setup: &ComparisonSetup<T>,
    kappas: &[T],
    radii: &[T],
    ics: &[StateVector<T>],
) -> Result<ComparisonResult<T>> {
    let mut rows = Vec::new();
    let mut trajectories = Vec::new();
    for &r in radii {
        let env = setup.density_environment(r)?;
        let ctrl = DensityController::new(Density::new(&env, setup.density), setup.controller.clone(), ControlLaw::Blended);
        let runs: Vec<Option<Trajectory<T>>> = ics
            .par_iter()
            .map(|ic| simulate_integrator(&env, &ctrl, &setup.integrator, ic, &SimOptions::default()).ok())
            .collect();
        rows.push(summarize(Method::Density, r.as_f64(), &runs));
        trajectories.push(runs);
    }
    for &k in kappas {
        let world = setup.world.with_kappa(k)?;
        let env = world.to_environment(setup.delta)?;
        let ctrl = NfController { world };
        let runs: Vec<Option<Trajectory<T>>> = ics
            .par_iter()
            .map(|ic| simulate_integrator(&env, &ctrl, &setup.integrator, ic, &SimOptions::default()).ok())
            .collect();
        rows.push(summarize(Method::Nf, k.as_f64(), &runs));
        trajectories.push(runs);
    }
    Ok(ComparisonResult { rows, trajectories })
}
