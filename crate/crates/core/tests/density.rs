mod common;

use approx::assert_relative_eq;
use common::{central_diff, circle, circle_env, free_env, norm, rel_err, step_oracle, sv};
use densnav_core::{
    theta_bound, Density, DensityParams, DistanceFn, DistanceKind, DomainBox, Environment, GeometryMode,
    ImplicitFn, Obstacle, StateVector,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn params(alpha: f64, theta: f64) -> DensityParams<f64> {
    DensityParams::new(alpha, theta, DistanceKind::SquaredEuclidean).unwrap()
}

/// `rho` for the circle scenario written out by hand.
fn circle_rho_oracle(x: &[f64], alpha: f64, theta: f64) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let phi = if r2 <= 4.0 {
        0.0
    } else if r2 > 9.0 {
        1.0
    } else {
        step_oracle((r2 - 4.0) / 5.0)
    };
    let v = (x[0] - 4.0).powi(2) + (x[1] + 3.0).powi(2);
    (phi + theta) / v.powf(alpha)
}

#[test]
fn distance_values() {
    let d = DistanceFn::new(DistanceKind::SquaredEuclidean, sv(&[4.0, -3.0]), GeometryMode::Euclidean);
    assert_eq!(d.value(&sv(&[4.0, -3.0])).unwrap(), 0.0);
    let o = DistanceFn::new(DistanceKind::SquaredEuclidean, sv(&[0.0, 0.0]), GeometryMode::Euclidean);
    assert_eq!(o.value(&sv(&[3.0, 4.0])).unwrap(), 25.0);
    assert_eq!(o.grad(&sv(&[1.0, 0.0])).unwrap().as_slice(), &[2.0, 0.0]);
    assert_eq!(o.grad(&sv(&[0.0, 0.0])).unwrap().as_slice(), &[0.0, 0.0]);
    let t = DistanceFn::new(DistanceKind::TrigonometricJoint, sv(&[PI, 0.0]), GeometryMode::Toroidal);
    assert_eq!(t.value(&sv(&[PI, 0.0])).unwrap(), 0.0);
}

#[test]
fn rho_branch_values() {
    let env = Environment::new(
        sv(&[0.0, 0.0]),
        vec![Obstacle::new(
            ImplicitFn::sphere(vec![5.0, 5.0], 1.0).unwrap(),
            ImplicitFn::sphere(vec![5.0, 5.0], 1.5).unwrap(),
            "a",
        )
        .unwrap()],
        DomainBox::new(vec![-9.0; 2], vec![9.0; 2]).unwrap(),
        0.5,
        GeometryMode::Euclidean,
    )
    .unwrap();
    let d = Density::new(&env, params(1.0, 0.1));
    assert_relative_eq!(d.rho(&sv(&[2.0, 0.0])).unwrap(), 0.275, max_relative = 1e-15);
    let inside = sv(&[5.2, 4.9]);
    let v = 5.2f64 * 5.2 + 4.9 * 4.9;
    assert_relative_eq!(d.rho(&inside).unwrap(), 0.1 / v, max_relative = 1e-15);

    let mut two = env.clone();
    two.obstacles.push(
        Obstacle::new(
            ImplicitFn::sphere(vec![-5.0, 5.0], 1.0).unwrap(),
            ImplicitFn::sphere(vec![-5.0, 5.0], 1.5).unwrap(),
            "b",
        )
        .unwrap(),
    );
    let d2 = Density::new(&two, params(2.0, 0.1));
    assert_relative_eq!(d2.rho(&sv(&[0.0, 2.0])).unwrap(), 1.1 * 1.1 / 16.0, max_relative = 1e-15);
}

#[test]
fn free_space_gradient() {
    let env = free_env(&[0.0, 0.0], 5.0, 0.5);
    let d = Density::new(&env, params(1.0, 0.01));
    assert_eq!(d.grad_rho(&sv(&[1.0, 0.0])).unwrap().as_slice(), &[-2.0, 0.0]);
}

#[test]
fn unsafe_interior_gradient_is_distance_only() {
    let env = circle_env();
    let (alpha, theta) = (3.0, 0.01);
    let d = Density::new(&env, params(alpha, theta));
    let x = [0.5, -0.7];
    let v: f64 = (0.5f64 - 4.0).powi(2) + (-0.7f64 + 3.0).powi(2);
    let k = -alpha * theta * v.powf(-alpha - 1.0);
    let expected = [k * 2.0 * (0.5 - 4.0), k * 2.0 * (-0.7 + 3.0)];
    assert!(rel_err(d.grad_rho(&sv(&x)).unwrap().as_slice(), &expected) < 1e-13);
}

#[test]
fn refuses_target() {
    let env = circle_env();
    let d = Density::new(&env, params(1.0, 0.01));
    assert!(d.rho(&sv(&[4.0, -3.0])).is_err());
    assert!(d.grad_rho(&sv(&[4.0, -3.0])).is_err());
}

#[test]
fn single_precision_density_agrees() {
    let env = circle_env();
    let env32 = Environment::<f32>::new(
        StateVector::new(vec![4.0f32, -3.0]).unwrap(),
        vec![Obstacle::new(
            ImplicitFn::sphere(vec![0.0f32, 0.0], 2.0).unwrap(),
            ImplicitFn::sphere(vec![0.0f32, 0.0], 3.0).unwrap(),
            "circle",
        )
        .unwrap()],
        DomainBox::new(vec![-8.0f32; 2], vec![8.0f32; 2]).unwrap(),
        1.0,
        GeometryMode::Euclidean,
    )
    .unwrap();
    let a = Density::new(&env, params(2.0, 0.01)).rho(&sv(&[-2.1, 1.3])).unwrap();
    let p32 = DensityParams::new(2.0f32, 0.01, DistanceKind::SquaredEuclidean).unwrap();
    let b = Density::new(&env32, p32)
        .rho(&StateVector::new(vec![-2.1f32, 1.3]).unwrap())
        .unwrap();
    assert!(((b as f64) - a).abs() <= 1e-5 * a);
}

#[test]
fn theta_bound_circle_case() {
    let env = circle_env();
    let tb = theta_bound(&env, DistanceKind::SquaredEuclidean, 0, 0.1, 1_000_000, 7).unwrap();
    // grid minimization of V over the disc
    let n = 2000;
    let mut vmin = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            let x = -2.0 + 4.0 * i as f64 / n as f64;
            let y = -2.0 + 4.0 * j as f64 / n as f64;
            if x * x + y * y <= 4.0 {
                vmin = vmin.min((x - 4.0).powi(2) + (y + 3.0).powi(2));
            }
        }
    }
    assert!((vmin - 9.0).abs() < 1e-3);
    assert!((tb.v_min - 9.0).abs() / 9.0 < 0.02, "v_min {}", tb.v_min);
    assert!((tb.measure - 4.0 * PI).abs() / (4.0 * PI) < 0.02, "measure {}", tb.measure);
    assert!((tb.theta_max / 0.1 - 9.0 / (4.0 * PI)).abs() < 0.02 * 9.0 / (4.0 * PI));

    let small = theta_bound(&env, DistanceKind::SquaredEuclidean, 0, 1e-3, 1_000_000, 7).unwrap();
    assert_relative_eq!(small.theta_max * 100.0, tb.theta_max, max_relative = 1e-12);
    let again = theta_bound(&env, DistanceKind::SquaredEuclidean, 0, 0.1, 1_000_000, 7).unwrap();
    assert_eq!(again, tb);
}

#[test]
fn sampled_upper_bound_on_unsafe_set() {
    let env = circle_env();
    let theta = 0.01;
    let d = Density::new(&env, params(1.0, theta));
    for i in 0..200 {
        let a = i as f64 * 0.1;
        let r = 2.0 * (i as f64 / 200.0).sqrt();
        let rho = d.rho(&sv(&[r * a.cos(), r * a.sin()])).unwrap();
        assert!(rho <= theta / 9.0 * (1.0 + 1e-12));
    }
}

proptest! {
    #[test]
    fn rho_matches_hand_formula(x in -8.0f64..8.0, y in -8.0f64..8.0, alpha in 0.5f64..10.0, theta in 1e-3f64..0.5) {
        prop_assume!((x - 4.0).powi(2) + (y + 3.0).powi(2) > 1e-3);
        let env = circle_env();
        let d = Density::new(&env, params(alpha, theta));
        let r = d.rho(&sv(&[x, y])).unwrap();
        let o = circle_rho_oracle(&[x, y], alpha, theta);
        prop_assert!(r > 0.0);
        prop_assert!((r - o).abs() <= 1e-12 * o);
    }

    #[test]
    fn grad_rho_in_sensing_region(r in 2.02f64..2.98, a in 0.0f64..std::f64::consts::TAU) {
        let env = circle_env();
        let d = Density::new(&env, params(1.0, 0.01));
        let x = [r * a.cos(), r * a.sin()];
        let g = d.grad_rho(&sv(&x)).unwrap();
        let fd = central_diff(|y| circle_rho_oracle(y, 1.0, 0.01), &x, 1e-6);
        let err = rel_err(g.as_slice(), &fd) * norm(&fd);
        prop_assert!(err <= 1e-5 * norm(&fd) + 1e-12);
    }

    #[test]
    fn free_space_field_is_antiparallel_to_distance(x in -8.0f64..8.0, y in -8.0f64..8.0) {
        prop_assume!(x * x + y * y > 9.0 && (x - 4.0).powi(2) + (y + 3.0).powi(2) > 1e-2);
        let env = circle_env();
        let d = Density::new(&env, params(2.0, 0.01));
        let g = d.grad_rho(&sv(&[x, y])).unwrap();
        let dv = [2.0 * (x - 4.0), 2.0 * (y + 3.0)];
        let cos = (g[0] * dv[0] + g[1] * dv[1]) / (norm(g.as_slice()) * norm(&dv));
        prop_assert!((cos + 1.0).abs() <= 1e-9);
    }

    #[test]
    fn trigonometric_distance_gradient(a in -PI..PI, b in -PI..PI) {
        let t = DistanceFn::new(DistanceKind::TrigonometricJoint, sv(&[PI, 0.0]), GeometryMode::Toroidal);
        let x = [a, b];
        let g = t.grad(&sv(&x)).unwrap();
        let fd = central_diff(|y| t.value(&sv(y)).unwrap(), &x, 1e-5);
        let err = rel_err(g.as_slice(), &fd) * norm(&fd);
        prop_assert!(err <= 1e-6 * norm(&fd) + 1e-9);
        prop_assert!(t.value(&sv(&x)).unwrap() >= 0.0);
    }

    #[test]
    fn two_obstacle_joint_free_space(x in -8.0f64..8.0, y in -8.0f64..8.0) {
        let mut env = circle_env();
        env.obstacles.push(circle(0.5, 0.8));
        env.obstacles[1].h = ImplicitFn::sphere(vec![-5.0, -5.0], 0.5).unwrap();
        env.obstacles[1].s = ImplicitFn::sphere(vec![-5.0, -5.0], 0.8).unwrap();
        prop_assume!(x * x + y * y > 9.0 && (x + 5.0).powi(2) + (y + 5.0).powi(2) > 0.64);
        let v = (x - 4.0).powi(2) + (y + 3.0).powi(2);
        prop_assume!(v > 1e-3);
        let d = Density::new(&env, params(1.5, 0.02));
        let rho = d.rho(&sv(&[x, y])).unwrap();
        prop_assert!((rho - 1.02f64.powi(2) / v.powf(1.5)).abs() <= 1e-13 * rho);
    }
}
