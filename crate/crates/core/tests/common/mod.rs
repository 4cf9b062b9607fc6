#![allow(dead_code)]

use densnav_core::{DomainBox, Environment, GeometryMode, ImplicitFn, Obstacle, StateVector};

pub fn sv(v: &[f64]) -> StateVector<f64> {
    StateVector::new(v.to_vec()).unwrap()
}

pub fn circle(r_unsafe: f64, r_sensing: f64) -> Obstacle<f64> {
    Obstacle::new(
        ImplicitFn::sphere(vec![0.0, 0.0], r_unsafe).unwrap(),
        ImplicitFn::sphere(vec![0.0, 0.0], r_sensing).unwrap(),
        "circle",
    )
    .unwrap()
}

/// Circle of radius 2 with sensing radius 3 at the origin, target (4, -3).
pub fn circle_env() -> Environment<f64> {
    Environment::new(
        sv(&[4.0, -3.0]),
        vec![circle(2.0, 3.0)],
        DomainBox::new(vec![-8.0, -8.0], vec![8.0, 8.0]).unwrap(),
        1.0,
        GeometryMode::Euclidean,
    )
    .unwrap()
}

pub fn free_env(target: &[f64], half: f64, delta: f64) -> Environment<f64> {
    let n = target.len();
    Environment::new(
        sv(target),
        Vec::new(),
        DomainBox::new(vec![-half; n], vec![half; n]).unwrap(),
        delta,
        GeometryMode::Euclidean,
    )
    .unwrap()
}

/// Closed form of the smooth step on (0, 1).
pub fn step_oracle(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + (1.0 / t - 1.0 / (1.0 - t)).exp())
    }
}

pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let p = f(&y);
            y[i] = x[i] - h;
            let m = f(&y);
            y[i] = x[i];
            (p - m) / (2.0 * h)
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub fn rel_err(approx: &[f64], exact: &[f64]) -> f64 {
    let d: Vec<f64> = approx.iter().zip(exact).map(|(a, b)| a - b).collect();
    let n = norm(exact);
    if n == 0.0 {
        norm(&d)
    } else {
        norm(&d) / n
    }
}
