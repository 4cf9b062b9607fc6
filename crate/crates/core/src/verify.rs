//! Numerical audits: the divergence inequality `div(rho grad rho) >= 0`,
//! Monte Carlo convergence and occupancy, and the analytic gradient.
//!
//! Loops fan out with rayon; results are collected in index order and
//! reduced sequentially with compensated sums, so every statistic is a
//! function of the inputs and seed only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::{ControlLaw, ControllerConfig, DensityController};
use crate::density::{theta_bound, Density, DensityParams};
use crate::dynamics::{simulate_integrator, IntegratorConfig, Outcome, SimOptions, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Environment, StateVector};
use crate::scalar::{derive_seed, CompensatedSum};

/// Cell-centred tensor grid over a box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Points per axis.
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, resolution: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("grid", "lo and hi must have equal, nonzero length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(invalid("grid", "lo must be < hi on every axis"));
        }
        if resolution == 0 {
            return Err(invalid("grid.resolution", "must be >= 1"));
        }
        Ok(Self { lo, hi, resolution })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) / self.resolution as f64)
            .collect()
    }

    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let h = self.spacing();
        let mut x = vec![0.0; self.dim()];
        for (i, xi) in x.iter_mut().enumerate() {
            let k = index % self.resolution;
            index /= self.resolution;
            *xi = self.lo[i] + (k as f64 + 0.5) * h[i];
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceOptions {
    /// Width of the exclusion band around `h = 0`, `s = 0`.
    pub band: f64,
    /// Grid points closer than this to the target are skipped; must be
    /// at least `delta`.
    pub target_exclusion: f64,
    /// Finite-difference step.
    pub fd_step: f64,
    /// Relative tolerance below zero before a value counts as a violation.
    pub tolerance: f64,
}

impl DivergenceOptions {
    /// Band of two grid cells, step a quarter band capped at `1e-3`.
    pub fn for_grid(grid: &GridSpec, delta: f64) -> Self {
        let cell = grid.spacing().into_iter().fold(0.0, f64::max);
        let band = 2.0 * cell;
        Self {
            band,
            target_exclusion: delta,
            fd_step: (band / 4.0).min(1e-3),
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceStats {
    pub grid: GridSpec,
    pub options: DivergenceOptions,
    pub alpha: f64,
    pub theta: f64,
    pub evaluated: usize,
    pub excluded: usize,
    pub min: f64,
    /// Smallest value of `div / scale`, scale-free.
    pub min_relative: f64,
    pub violations: usize,
    pub violation_fraction: f64,
    /// Minimum of the divergence over the supplied initial set samples.
    pub xi: Option<f64>,
}

/// Distance to the zero level set of `f`, to first order.
fn level_distance(value: f64, grad: &[f64]) -> f64 {
    let g = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if g == 0.0 {
        f64::INFINITY
    } else {
        value.abs() / g
    }
}

fn near_level_sets(env: &Environment<f64>, x: &[f64], band: f64) -> bool {
    env.obstacles.iter().any(|o| {
        let h = o.h.value_unchecked(x, env.mode);
        let s = o.s.value_unchecked(x, env.mode);
        level_distance(h, &o.h.grad_unchecked(x, env.mode)) < band
            || level_distance(s, &o.s.grad_unchecked(x, env.mode)) < band
    })
}

/// `(div, scale)` with `div = |grad rho|^2 + rho lap rho` from 5-point
/// stencils and `scale = |grad rho|^2 + rho sum |d_ii rho|`.
fn divergence_at(density: &Density<'_, f64>, x: &[f64], step: f64) -> Result<(f64, f64)> {
    let r0 = density.rho_unchecked(x)?;
    let mut grad2 = CompensatedSum::new();
    let mut lap = CompensatedSum::new();
    let mut lap_abs = CompensatedSum::new();
    let mut y = x.to_vec();
    for i in 0..x.len() {
        let mut f = |d: f64| -> Result<f64> {
            y[i] = x[i] + d;
            let v = density.rho_unchecked(&y);
            y[i] = x[i];
            v
        };
        let (p1, p2, m1, m2) = (f(step)?, f(2.0 * step)?, f(-step)?, f(-2.0 * step)?);
        let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * step);
        let d2 = (-p2 + 16.0 * p1 - 30.0 * r0 + 16.0 * m1 - m2) / (12.0 * step * step);
        grad2.add(d1 * d1);
        lap.add(d2);
        lap_abs.add(d2.abs());
    }
    let g2 = grad2.value();
    Ok((g2 + r0 * lap.value(), g2 + r0 * lap_abs.value()))
}

/// `(div, scale)` at every grid point in index order; `None` inside an
/// exclusion band.
pub fn divergence_field(
    env: &Environment<f64>,
    params: DensityParams<f64>,
    grid: &GridSpec,
    opts: &DivergenceOptions,
) -> Vec<Option<(f64, f64)>> {
    let density = Density::new(env, params);
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.point(k);
            if env.distance_to_target(&x) < opts.target_exclusion || near_level_sets(env, &x, opts.band) {
                return None;
            }
            divergence_at(&density, &x, opts.fd_step).ok()
        })
        .collect()
}

/// Sample `div(rho grad rho)` on `grid`, skipping the exclusion bands.
pub fn divergence_check(
    env: &Environment<f64>,
    params: DensityParams<f64>,
    grid: &GridSpec,
    opts: &DivergenceOptions,
    x0_samples: &[StateVector<f64>],
) -> Result<DivergenceStats> {
    if grid.dim() != env.dim() {
        return Err(Error::DimensionMismatch {
            expected: env.dim(),
            got: grid.dim(),
        });
    }
    if !(opts.target_exclusion >= env.delta) {
        return Err(Error::GridIntersectsTarget { delta: env.delta });
    }
    if !(opts.fd_step > 0.0 && opts.band >= 0.0) {
        return Err(invalid("fd_step", "must be > 0"));
    }
    let density = Density::new(env, params);
    let values = divergence_field(env, params, grid, opts);

    let mut evaluated = 0usize;
    let mut violations = 0usize;
    let mut min = f64::INFINITY;
    let mut min_relative = f64::INFINITY;
    for (div, scale) in values.iter().flatten() {
        evaluated += 1;
        min = min.min(*div);
        let rel = if *scale > 0.0 { div / scale } else { 0.0 };
        min_relative = min_relative.min(rel);
        if *div < -opts.tolerance * scale {
            violations += 1;
        }
    }
    let xi = if x0_samples.is_empty() {
        None
    } else {
        let v: Vec<f64> = x0_samples
            .par_iter()
            .map(|x| {
                divergence_at(&density, x.as_slice(), opts.fd_step)
                    .map(|(d, _)| d)
                    .unwrap_or(f64::NAN)
            })
            .collect();
        Some(v.into_iter().fold(f64::INFINITY, f64::min))
    };
    Ok(DivergenceStats {
        grid: grid.clone(),
        options: *opts,
        alpha: params.alpha,
        theta: params.theta,
        evaluated,
        excluded: grid.len() - evaluated,
        min: if evaluated == 0 { 0.0 } else { min },
        min_relative: if evaluated == 0 { 0.0 } else { min_relative },
        violations,
        violation_fraction: if evaluated == 0 { 0.0 } else { violations as f64 / evaluated as f64 },
        xi,
    })
}

/// Divergence statistics for each `alpha`, all else fixed.
pub fn alpha_sweep(
    env: &Environment<f64>,
    params: DensityParams<f64>,
    alphas: &[f64],
    grid: &GridSpec,
    opts: &DivergenceOptions,
    x0_samples: &[StateVector<f64>],
) -> Result<Vec<DivergenceStats>> {
    alphas
        .iter()
        .map(|&a| {
            let p = DensityParams::new(a, params.theta, params.distance)?;
            divergence_check(env, p, grid, opts, x0_samples)
        })
        .collect()
}

/// How initial conditions are produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IcSampler {
    Explicit { points: Vec<Vec<f64>> },
    /// `count` evenly spaced points on the segment, endpoints included.
    Line { from: Vec<f64>, to: Vec<f64>, count: usize },
    /// Uniform in the box, rejecting points in any unsafe set.
    Uniform { lo: Vec<f64>, hi: Vec<f64>, count: usize, seed: u64 },
}

impl IcSampler {
    pub fn generate(&self, env: &Environment<f64>) -> Result<Vec<StateVector<f64>>> {
        match self {
            IcSampler::Explicit { points } => points.iter().map(|p| StateVector::new(p.clone())).collect(),
            IcSampler::Line { from, to, count } => {
                if from.len() != to.len() {
                    return Err(invalid("line", "endpoint dimensions differ"));
                }
                (0..*count)
                    .map(|i| {
                        let t = if *count == 1 { 0.0 } else { i as f64 / (*count - 1) as f64 };
                        StateVector::new(from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect())
                    })
                    .collect()
            }
            IcSampler::Uniform { lo, hi, count, seed } => {
                if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(invalid("uniform", "lo must be < hi on every axis"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(*count);
                let mut tries = 0usize;
                while out.len() < *count {
                    tries += 1;
                    if tries > 1000 * (*count).max(1) {
                        return Err(Error::EstimationFailed("safe region too small to sample".into()));
                    }
                    let x: Vec<f64> = lo.iter().zip(hi).map(|(&a, &b)| rng.random_range(a..b)).collect();
                    if env.in_unsafe_set(&x).is_none() && env.distance_to_target(&x) > 0.0 {
                        out.push(StateVector::from(x));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Lebesgue measure of the sampled region (0 for lines and point lists).
    pub fn measure(&self) -> f64 {
        match self {
            IcSampler::Uniform { lo, hi, .. } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub index: usize,
    pub seed: u64,
    pub initial: Vec<f64>,
    /// `None` when the initial condition was rejected.
    pub outcome: Option<Outcome>,
    pub error: Option<String>,
    pub final_state: Vec<f64>,
    pub final_time: f64,
    pub path_length: f64,
    pub min_h: f64,
    pub occupancy_time_unsafe: Vec<f64>,
    pub max_control: f64,
}

impl RunSummary {
    fn from_result(index: usize, seed: u64, ic: &StateVector<f64>, r: &Result<Trajectory<f64>>) -> Self {
        match r {
            Ok(t) => Self {
                index,
                seed,
                initial: ic.to_f64(),
                outcome: Some(t.outcome),
                error: None,
                final_state: t.final_state.to_f64(),
                final_time: t.final_time,
                path_length: t.path_length,
                min_h: t.min_h,
                occupancy_time_unsafe: t.occupancy_time_unsafe.clone(),
                max_control: t.max_control,
            },
            Err(e) => Self {
                index,
                seed,
                initial: ic.to_f64(),
                outcome: None,
                error: Some(e.to_string()),
                final_state: ic.to_f64(),
                final_time: 0.0,
                path_length: 0.0,
                min_h: f64::NAN,
                occupancy_time_unsafe: Vec::new(),
                max_control: 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStats {
    pub runs: usize,
    pub converged: usize,
    pub max_time: usize,
    pub unsafe_entered: usize,
    pub numerical_failure: usize,
    pub rejected: usize,
    pub fraction_converged: f64,
    pub fraction_unsafe: f64,
    pub fraction_max_time: f64,
    pub mean_path_length: f64,
    pub min_clearance: f64,
    pub runs_detail: Vec<RunSummary>,
}

/// Closed-loop runs from each initial condition. Run `i` draws its noise
/// from `derive_seed(seed, i)`.
pub fn run_batch(
    env: &Environment<f64>,
    params: DensityParams<f64>,
    ctrl: &ControllerConfig<f64>,
    cfg: &IntegratorConfig<f64>,
    ics: &[StateVector<f64>],
    seed: u64,
    allow_unsafe_start: bool,
) -> Vec<(Result<Trajectory<f64>>, u64)> {
    let controller = DensityController::new(Density::new(env, params), ctrl.clone(), ControlLaw::Blended);
    ics.par_iter()
        .enumerate()
        .map(|(i, ic)| {
            let s = derive_seed(seed, i as u64);
            let opts = SimOptions {
                noise: ctrl.noise.as_ref(),
                seed: s,
                allow_unsafe_start,
            };
            (simulate_integrator(env, &controller, cfg, ic, &opts), s)
        })
        .collect()
}

pub fn summarize_runs(ics: &[StateVector<f64>], results: &[(Result<Trajectory<f64>>, u64)]) -> ConvergenceStats {
    let detail: Vec<RunSummary> = results
        .iter()
        .enumerate()
        .map(|(i, (r, s))| RunSummary::from_result(i, *s, &ics[i], r))
        .collect();
    let count = |o: Outcome| detail.iter().filter(|d| d.outcome == Some(o)).count();
    let runs = detail.len();
    let n = runs.max(1) as f64;
    let converged = count(Outcome::Converged);
    let unsafe_entered = count(Outcome::UnsafeEntered);
    let max_time = count(Outcome::MaxTime);
    let done: Vec<&RunSummary> = detail.iter().filter(|d| d.outcome.is_some()).collect();
    let lengths: CompensatedSum = done.iter().map(|d| d.path_length).collect();
    ConvergenceStats {
        runs,
        converged,
        max_time,
        unsafe_entered,
        numerical_failure: count(Outcome::NumericalFailure),
        rejected: runs - done.len(),
        fraction_converged: if runs == 0 { 0.0 } else { converged as f64 / n },
        fraction_unsafe: if runs == 0 { 0.0 } else { unsafe_entered as f64 / n },
        fraction_max_time: if runs == 0 { 0.0 } else { max_time as f64 / n },
        mean_path_length: if done.is_empty() { 0.0 } else { lengths.value() / done.len() as f64 },
        min_clearance: done.iter().map(|d| d.min_h).fold(f64::INFINITY, f64::min),
        runs_detail: detail,
    }
}

pub fn convergence_monte_carlo(
    env: &Environment<f64>,
    params: DensityParams<f64>,
    ctrl: &ControllerConfig<f64>,
    cfg: &IntegratorConfig<f64>,
    ics: &[StateVector<f64>],
    seed: u64,
) -> ConvergenceStats {
    let results = run_batch(env, params, ctrl, cfg, ics, seed, false);
    summarize_runs(ics, &results)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyReport {
    pub runs: usize,
    /// Mean of `T(y)` per obstacle over the initial conditions.
    pub mean_occupancy: Vec<f64>,
    /// `m(X0) * mean T`, the Monte Carlo estimate of `int_X0 T(y) dy`.
    pub integral_estimate: Vec<f64>,
    /// `theta * m(X_u) / V_min`, the epsilon the configured theta certifies.
    pub epsilon_implied: Vec<f64>,
    pub within_bound: bool,
    /// Runs with positive occupancy.
    pub flagged_runs: Vec<usize>,
}

#[allow(clippy::too_many_arguments)]
pub fn occupancy_audit(
    env: &Environment<f64>,
    params: DensityParams<f64>,
    ctrl: &ControllerConfig<f64>,
    cfg: &IntegratorConfig<f64>,
    ics: &[StateVector<f64>],
    x0_measure: f64,
    seed: u64,
    bound_samples: usize,
    allow_unsafe_start: bool,
) -> Result<OccupancyReport> {
    let results = run_batch(env, params, ctrl, cfg, ics, seed, allow_unsafe_start);
    let k = env.obstacles.len();
    let mut sums = vec![CompensatedSum::new(); k];
    let mut flagged = Vec::new();
    for (i, (r, _)) in results.iter().enumerate() {
        if let Ok(t) = r {
            for (acc, &o) in sums.iter_mut().zip(&t.occupancy_time_unsafe) {
                acc.add(o);
            }
            if t.entered_unsafe() {
                flagged.push(i);
            }
        }
    }
    let n = ics.len().max(1) as f64;
    let mean: Vec<f64> = sums.iter().map(|s| s.value() / n).collect();
    let integral: Vec<f64> = mean.iter().map(|m| m * x0_measure).collect();
    let epsilon_implied = (0..k)
        .map(|j| {
            let tb = theta_bound(env, params.distance, j, 1.0, bound_samples, derive_seed(seed, u64::MAX - j as u64))?;
            Ok(params.theta * tb.measure / tb.v_min)
        })
        .collect::<Result<Vec<f64>>>()?;
    let within_bound = integral.iter().zip(&epsilon_implied).all(|(g, e)| g <= e);
    Ok(OccupancyReport {
        runs: ics.len(),
        mean_occupancy: mean,
        integral_estimate: integral,
        epsilon_implied,
        within_bound,
        flagged_runs: flagged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientAudit {
    pub points: usize,
    pub rejected: usize,
    pub band: f64,
    pub max_relative_error: f64,
    pub worst_point: Vec<f64>,
}

/// Gradient of `rho` by 5-point central differences.
pub fn fd_grad_rho(density: &Density<'_, f64>, x: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut f = |d: f64| -> Result<f64> {
            y[i] = x[i] + d;
            let v = density.rho_unchecked(&y);
            y[i] = x[i];
            v
        };
        let (p1, p2, m1, m2) = (f(step)?, f(2.0 * step)?, f(-step)?, f(-2.0 * step)?);
        out.push((-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * step));
    }
    Ok(out)
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

/// Max relative error of the analytic gradient against differences of
/// `rho` at `points` uniform draws outside the exclusion bands.
///
/// Pass `free_only` to restrict to points outside every sensing set.
pub fn gradient_audit(
    env: &Environment<f64>,
    params: DensityParams<f64>,
    points: usize,
    seed: u64,
    band: f64,
    free_only: bool,
) -> Result<GradientAudit> {
    let density = Density::new(env, params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(points);
    let mut rejected = 0usize;
    while xs.len() < points {
        if rejected > 1000 * points.max(1) {
            return Err(Error::EstimationFailed("exclusion bands cover the domain".into()));
        }
        let x = env.domain.sample(&mut rng).into_inner();
        let excluded = env.distance_to_target(&x) <= band.max(1e-3)
            || near_level_sets(env, &x, band)
            || (free_only
                && env
                    .obstacles
                    .iter()
                    .any(|o| o.s.value_unchecked(&x, env.mode) <= 0.0));
        if excluded {
            rejected += 1;
        } else {
            xs.push(x);
        }
    }
    let step = (band / 4.0).min(1e-4);
    let errs: Vec<f64> = xs
        .par_iter()
        .map(|x| match (density.grad_rho_unchecked(x), fd_grad_rho(&density, x, step)) {
            (Ok(g), Ok(fd)) => relative_error(&fd, &g),
            _ => f64::INFINITY,
        })
        .collect();
    let (worst, max) = errs
        .iter()
        .enumerate()
        .fold((0usize, 0.0f64), |(wi, wm), (i, &e)| if e > wm { (i, e) } else { (wi, wm) });
    Ok(GradientAudit {
        points,
        rejected,
        band,
        max_relative_error: max,
        worst_point: xs.get(worst).cloned().unwrap_or_default(),
    })
}

/// Everything `verify` reports for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub divergence: DivergenceStats,
    pub alpha_sweep: Vec<DivergenceStats>,
    pub convergence: Option<ConvergenceStats>,
    pub occupancy: Option<OccupancyReport>,
    pub gradient: GradientAudit,
}

/// Uniform points in `lo..hi` excluding unsafe sets, sensing sets and the
/// `delta` ball: samples of an initial set far from obstacles.
pub fn sample_initial_set(env: &Environment<f64>, count: usize, seed: u64) -> Vec<StateVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count && tries < 1000 * count.max(1) {
        tries += 1;
        let x = env.domain.sample(&mut rng);
        let free = env
            .obstacles
            .iter()
            .all(|o| o.s.value_unchecked(x.as_slice(), env.mode) > 0.0);
        if free && env.distance_to_target(x.as_slice()) > env.delta {
            out.push(x);
        }
    }
    out
}
