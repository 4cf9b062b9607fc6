//! Scene plots: unsafe sets, sensing boundaries, density level sets and
//! trajectories in the plane of the first two coordinates.

use densnav_core::{Density, DensityParams, Environment, StateVector};

use crate::svg::{Frame, ScalarGrid, Svg, BLUE, DARK, GRAY, GREEN, RED};

/// Full state for a point of the plotting plane; remaining coordinates sit
/// at the target.
pub fn lift(env: &Environment<f64>, p: [f64; 2]) -> StateVector<f64> {
    let mut x = env.target.to_f64();
    x[0] = p[0];
    x[1] = p[1];
    StateVector::from(x)
}

pub fn plane_box(env: &Environment<f64>) -> ([f64; 2], [f64; 2]) {
    (
        [env.domain.lo[0], env.domain.lo[1]],
        [env.domain.hi[0], env.domain.hi[1]],
    )
}

/// Unsafe sets filled grey, sensing boundaries dashed, target and its
/// blend ball in green.
pub fn draw_obstacles(svg: &mut Svg, f: &Frame, env: &Environment<f64>, n: usize) {
    for o in &env.obstacles {
        let h = ScalarGrid::sample(f.lo, f.hi, n, |p| o.h.eval_in(&lift(env, p), env.mode).unwrap_or(f64::NAN));
        svg.fill_negative(f, &h, GRAY);
        svg.segments(f, &h.contour(0.0), DARK, 1.2, None);
        let s = ScalarGrid::sample(f.lo, f.hi, n, |p| o.s.eval_in(&lift(env, p), env.mode).unwrap_or(f64::NAN));
        svg.segments(f, &s.contour(0.0), DARK, 0.8, Some("4 3"));
    }
    draw_target(svg, f, env);
}

pub fn draw_target(svg: &mut Svg, f: &Frame, env: &Environment<f64>) {
    let t = env.target.as_slice();
    svg.circle(f, [t[0], t[1]], env.delta, "none", GREEN, Some("2 2"));
    svg.dot(f, [t[0], t[1]], 4.0, GREEN);
}

/// Ten level sets of `log10 rho` spread between its 5th and 95th
/// percentiles on the plot grid.
pub fn draw_density_levels(svg: &mut Svg, f: &Frame, env: &Environment<f64>, params: DensityParams<f64>, n: usize) {
    let d = Density::new(env, params);
    let g = ScalarGrid::sample(f.lo, f.hi, n, |p| match d.rho(&lift(env, p)) {
        Ok(r) if r > 0.0 => r.log10(),
        _ => f64::NAN,
    });
    let mut v: Vec<f64> = g.values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 10 {
        return;
    }
    v.sort_by(f64::total_cmp);
    let lo = v[v.len() / 20];
    let hi = v[v.len() * 19 / 20];
    if !(hi > lo) {
        return;
    }
    for k in 0..10 {
        let level = lo + (hi - lo) * (k as f64 + 0.5) / 10.0;
        svg.segments(f, &g.contour(level), "#8fb8de", 0.6, None);
    }
}

pub fn draw_path(svg: &mut Svg, f: &Frame, states: &[StateVector<f64>], converged: bool) {
    let pts: Vec<[f64; 2]> = states.iter().map(|s| [s[0], s[1]]).collect();
    let colour = if converged { BLUE } else { RED };
    svg.polyline(f, &pts, colour, 1.0, 2000);
    if let Some(p) = pts.first() {
        svg.dot(f, *p, 2.0, colour);
    }
}
