mod common;

use common::{circle_env, free_env, sv};
use densnav_core::verify::{
    convergence_monte_carlo, divergence_check, divergence_field, gradient_audit, occupancy_audit, run_batch,
    sample_initial_set, summarize_runs, DivergenceOptions, GridSpec,
};
use densnav_core::{derive_seed, ControllerConfig, DensityParams, DistanceKind, Error, IntegratorConfig, NoiseModel};
use proptest::prelude::*;

fn params(alpha: f64) -> DensityParams<f64> {
    DensityParams::new(alpha, 0.01, DistanceKind::SquaredEuclidean).unwrap()
}

/// `div(rho grad rho)` for `rho = |x - c|^(-2 alpha)` in `n` dimensions.
fn free_divergence(alpha: f64, n: usize, r: f64) -> f64 {
    -2.0 * alpha * (n as f64 - 4.0 * alpha - 2.0) * r.powf(-4.0 * alpha - 2.0)
}

#[test]
fn obstacle_free_divergence_matches_closed_form() {
    for (n, alpha) in [(2usize, 1.0), (2, 2.5), (3, 1.0)] {
        let target = vec![0.0; n];
        let env = free_env(&target, 4.0, 0.5);
        let grid = GridSpec::new(vec![-4.0; n], vec![4.0; n], if n == 2 { 40 } else { 12 }).unwrap();
        let opts = DivergenceOptions::for_grid(&grid, 0.5);
        let field = divergence_field(&env, params(alpha), &grid, &opts);
        let mut checked = 0;
        for (k, v) in field.iter().enumerate() {
            let x = grid.point(k);
            let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            match v {
                None => assert!(r < 0.5),
                Some((div, _)) => {
                    let exact = free_divergence(alpha, n, r);
                    assert!(exact > 0.0);
                    assert!((div - exact).abs() <= 1e-4 * exact, "n={n} alpha={alpha} r={r}: {div} vs {exact}");
                    checked += 1;
                }
            }
        }
        assert!(checked > grid.len() / 2);
        let stats = divergence_check(&env, params(alpha), &grid, &opts, &[]).unwrap();
        assert_eq!(stats.violations, 0);
        assert_eq!(stats.evaluated, checked);
        assert!(stats.xi.is_none());
    }
}

#[test]
fn grid_must_exclude_target_ball() {
    let env = circle_env();
    let grid = GridSpec::new(vec![-8.0; 2], vec![8.0; 2], 20).unwrap();
    let mut opts = DivergenceOptions::for_grid(&grid, env.delta);
    opts.target_exclusion = 0.5 * env.delta;
    assert!(matches!(
        divergence_check(&env, params(1.0), &grid, &opts, &[]),
        Err(Error::GridIntersectsTarget { .. })
    ));
    let wrong_dim = GridSpec::new(vec![-8.0; 3], vec![8.0; 3], 4).unwrap();
    let opts = DivergenceOptions::for_grid(&wrong_dim, env.delta);
    assert!(divergence_check(&env, params(1.0), &wrong_dim, &opts, &[]).is_err());
}

#[test]
fn empty_batch_statistics() {
    let env = circle_env();
    let ctrl = ControllerConfig::new(1.0).unwrap();
    let cfg = IntegratorConfig::new(0.05, 100.0, 0.05).unwrap();
    let s = convergence_monte_carlo(&env, params(1.0), &ctrl, &cfg, &[], 1);
    assert_eq!(s.runs, 0);
    assert_eq!(s.fraction_converged, 0.0);
    assert_eq!(s.mean_path_length, 0.0);
    assert!(s.runs_detail.is_empty());
}

#[test]
fn forced_unsafe_start_is_flagged() {
    let env = circle_env();
    let ctrl = ControllerConfig::new(1.0).unwrap();
    let cfg = IntegratorConfig::new(0.05, 200.0, 0.05).unwrap();
    let ics = vec![sv(&[-6.0, 6.0]), sv(&[0.5, 0.5]), sv(&[6.0, 2.0])];
    let rep = occupancy_audit(&env, params(1.0), &ctrl, &cfg, &ics, 1.0, 3, 100_000, true).unwrap();
    assert_eq!(rep.flagged_runs, vec![1]);
    assert!(rep.mean_occupancy[0] > 0.0);
    let strict = convergence_monte_carlo(&env, params(1.0), &ctrl, &cfg, &ics, 3);
    assert_eq!(strict.rejected, 1);
    assert!(strict.runs_detail[1].error.is_some());
}

#[test]
fn free_space_gradient_audit() {
    let env = circle_env();
    let a = gradient_audit(&env, params(2.0), 2000, 9, 0.05, true).unwrap();
    assert!(a.max_relative_error < 1e-8, "{}", a.max_relative_error);
    let b = gradient_audit(&env, params(2.0), 2000, 9, 0.05, true).unwrap();
    assert_eq!(a, b);
}

#[test]
fn initial_set_avoids_sensing_and_target() {
    let env = circle_env();
    let pts = sample_initial_set(&env, 500, 4);
    assert_eq!(pts.len(), 500);
    for p in &pts {
        assert!(p[0].hypot(p[1]) > 3.0);
        assert!((p[0] - 4.0).hypot(p[1] + 3.0) > 1.0);
    }
    assert_eq!(pts, sample_initial_set(&env, 500, 4));
}

#[test]
fn batches_do_not_depend_on_thread_count() {
    let env = circle_env();
    let ctrl = ControllerConfig::new(1.0)
        .unwrap()
        .with_noise(NoiseModel::isotropic(2, 1e-3).unwrap());
    let cfg = IntegratorConfig::new(0.05, 200.0, 0.05).unwrap();
    let ics = sample_initial_set(&env, 24, 8);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let r = run_batch(&env, params(1.0), &ctrl, &cfg, &ics, 42, false);
            summarize_runs(&ics, &r)
        })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    for (i, d) in one.runs_detail.iter().enumerate() {
        assert_eq!(d.seed, derive_seed(42, i as u64));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn seeds_are_distinct(base in any::<u64>(), i in 0u64..1000, j in 0u64..1000) {
        prop_assume!(i != j);
        prop_assert_ne!(derive_seed(base, i), derive_seed(base, j));
    }
}
