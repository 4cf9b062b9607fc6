mod common;

use common::{central_diff, norm, rel_err, sv};
use densnav_core::baseline_nf::cover_with_discs;
use densnav_core::{
    simulate_integrator, GeometryMode, ImplicitFn, IntegratorConfig, NfController, Outcome, SimOptions, SphereWorld,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn world(kappa: f64) -> SphereWorld<f64> {
    SphereWorld::new(10.0, sv(&[0.0, 0.0]), vec![(vec![3.0, 0.0], 1.0)], kappa).unwrap()
}

#[test]
fn named_values() {
    let w = world(1.0);
    assert_eq!(w.nf_value(&sv(&[0.0, 0.0])).unwrap(), 0.0);
    assert_eq!(w.nf_value(&sv(&[4.0, 0.0])).unwrap(), 1.0);
    // d^2 = 2.25, beta = (100 - 2.25) (2.25 - 1)
    let expected = 2.25 / (2.25 + 97.75 * 1.25);
    assert!((w.nf_value(&sv(&[1.5, 0.0])).unwrap() - expected).abs() < 1e-15);
    assert!(w.nf_control(&sv(&[0.0, 0.0])).unwrap().iter().all(|c| *c == 0.0));
    assert!(w.nf_value(&sv(&[3.0, 0.5])).is_err());
    assert!(w.nf_value(&sv(&[11.0, 0.0])).is_err());
}

#[test]
fn invalid_worlds_rejected() {
    let g = sv(&[0.0, 0.0]);
    assert!(SphereWorld::new(10.0, g.clone(), vec![(vec![3.0, 0.0], 1.0), (vec![4.5, 0.0], 1.0)], 2.0).is_err());
    assert!(SphereWorld::new(10.0, g.clone(), vec![(vec![9.5, 0.0], 1.0)], 2.0).is_err());
    assert!(SphereWorld::new(10.0, g.clone(), vec![(vec![0.2, 0.0], 1.0)], 2.0).is_err());
    assert!(SphereWorld::new(10.0, g, vec![(vec![3.0, 0.0], 1.0)], 0.5).is_err());
}

#[test]
fn symmetric_pair_keeps_axis() {
    let w = SphereWorld::new(10.0, sv(&[0.0, 0.0]), vec![(vec![3.0, 2.0], 1.0), (vec![3.0, -2.0], 1.0)], 3.0).unwrap();
    for x in [4.0, 6.0, 8.5] {
        let u = w.nf_control(&sv(&[x, 0.0])).unwrap();
        assert!(u[1].abs() <= 1e-15, "{u:?}");
    }
}

#[test]
fn descent_converges_almost_everywhere() {
    let w = world(10.0);
    let env = w.to_environment(0.5).unwrap();
    let ctrl = NfController { world: w.clone() };
    let cfg = IntegratorConfig::new(0.05, 20_000.0, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut ics = Vec::new();
    while ics.len() < 200 {
        let x = [rng.random_range(-7.0..7.0), rng.random_range(-7.0..7.0)];
        let free = (x[0] - 3.0f64).hypot(x[1]) > 1.1 && x[0].hypot(x[1]) > 0.5;
        if free {
            ics.push(sv(&x));
        }
    }
    let converged = ics
        .iter()
        .filter(|ic| {
            simulate_integrator(&env, &ctrl, &cfg, ic, &SimOptions::default())
                .map(|t| t.outcome == Outcome::Converged)
                .unwrap_or(false)
        })
        .count();
    assert!(converged >= 198, "{converged}/200");
}

#[test]
fn disc_cover_contains_grid_points() {
    let h = ImplicitFn::c_shape(vec![0.0, 0.0], 2.0, 1.33, 3.9343e-3, 8).unwrap();
    let centers: Vec<[f64; 2]> = (0..6)
        .map(|k| {
            let a = (60.0 + 48.0 * k as f64).to_radians();
            [2.0 * a.cos(), 2.0 * a.sin()]
        })
        .collect();
    let discs = cover_with_discs(&h, [-4.0, -4.0], [4.0, 4.0], 200, &centers).unwrap();
    let step = 8.0 / 200.0;
    for i in 0..200 {
        for j in 0..200 {
            let x = [-4.0 + (i as f64 + 0.5) * step, -4.0 + (j as f64 + 0.5) * step];
            if h.eval_in(&sv(&x), GeometryMode::Euclidean).unwrap() <= 0.0 {
                assert!(discs.iter().any(|(c, r)| (x[0] - c[0]).hypot(x[1] - c[1]) <= *r));
            }
        }
    }
}

proptest! {
    #[test]
    fn value_in_unit_interval_and_gradient_matches(x in -9.0f64..9.0, y in -9.0f64..9.0, kappa in 1.0f64..8.0) {
        prop_assume!(x.hypot(y) < 9.5 && (x - 3.0).hypot(y) > 1.05 && x.hypot(y) > 0.1);
        let w = world(kappa);
        let p = sv(&[x, y]);
        let v = w.nf_value(&p).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        let g = w.nf_grad(&p).unwrap();
        let fd = central_diff(|z| w.nf_value(&sv(z)).unwrap(), &[x, y], 1e-6);
        let err = rel_err(g.as_slice(), &fd) * norm(&fd);
        prop_assert!(err <= 1e-5 * norm(&fd) + 1e-10);
    }
}
