use std::f64::consts::FRAC_PI_2;

use approx::assert_relative_eq;
use dimerlab::disorder::{DisorderLaw, LayeredSample};
use dimerlab::matprod::{lyapunov_rows, LyapMethod};
use dimerlab::spectrum::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn closed_form(theta: f64, w1: f64) -> f64 {
    let s = w1 * theta.sin();
    (s + (1.0 + s * s).sqrt()).ln()
}

#[test]
fn pure_curve_matches_closed_form() {
    for w1 in [0.5, 1.0, 1.7] {
        let curve = build_spectral_curve(0.0, 1.0, &CurveModel::Pure { w1 }, &default_theta_grid(), &Budget::default()).unwrap();
        for n in curve.nodes() {
            assert_relative_eq!(n.regressed, closed_form(n.theta, w1), epsilon = 1e-12);
        }
        for t in [0.013, 0.4, 1.2, 1.55] {
            assert_relative_eq!(curve.eval(t), closed_form(t, w1), epsilon = 1e-5);
        }
    }
}

#[test]
fn constant_stream_matches_pure() {
    let rows = LayeredSample::constant(0, 200_000, 1.0, 1.0).unwrap();
    for theta in [0.05, 0.3, 1.0, FRAC_PI_2] {
        let e = lyapunov_rows(rows.rows(), theta, 0.0, 30, LyapMethod::Trace).unwrap();
        assert!((e.value - closed_form(theta, 1.0)).abs() < 1e-4);
        assert!(e.stderr < 1e-3);
    }
}

#[test]
fn pure_gamma_endpoint_is_log_gamma() {
    for g in [1.2, 2.0, 3.5] {
        assert_relative_eq!(pure_lyapunov(0.0, 0.0, g, 1.0), g.ln(), epsilon = 1e-12);
    }
}

#[test]
fn pure_inversion() {
    let w1 = 1.3;
    let curve = build_spectral_curve(0.0, 1.0, &CurveModel::Pure { w1 }, &default_theta_grid(), &Budget::default()).unwrap();
    for h in [0.1f64, 0.5, 0.9] {
        let want = (h.sinh() / w1).asin();
        assert_relative_eq!(invert_curve(&curve, h).theta(), want, epsilon = 1e-5);
    }
    assert_eq!(invert_curve(&curve, curve.h_c()), Inversion::Above);
    assert_eq!(invert_curve(&curve, 0.0), Inversion::Below);
    let node = curve.nodes()[30];
    assert_relative_eq!(invert_curve(&curve, node.regressed).theta(), node.theta, epsilon = 1e-9);
}

#[test]
fn pure_free_energy_regions() {
    let curve = build_spectral_curve(0.0, 1.0, &CurveModel::Pure { w1: 1.0 }, &default_theta_grid(), &Budget::default()).unwrap();
    let hc = curve.h_c();
    assert_relative_eq!(hc, (1.0 + 2f64.sqrt()).ln(), epsilon = 1e-12);
    for h in [hc, hc + 0.1, 2.0] {
        let f = curve.free_energy(h);
        assert_eq!(f.value, 0.5 * h);
        assert_eq!(f.phase_label, Phase::Frozen);
    }
    let f0 = curve.free_energy(0.0);
    assert_eq!(f0.phase_label, Phase::FlatC);
    assert_eq!(curve.free_energy(-0.3).value, curve.free_energy(0.3).value);
    let f = curve.free_energy(0.3);
    assert_eq!(f.phase_label, Phase::Liquid);
    assert!(f.value >= f0.value.max(0.15));
    assert_relative_eq!(f.value - f0.value, f.excess_over_flat, epsilon = 1e-9);
    // quadratic onset near H1 = 0
    let d1 = curve.free_energy(0.01).excess_over_flat;
    let d2 = curve.free_energy(0.02).excess_over_flat;
    assert_relative_eq!(d2 / d1, 4.0, epsilon = 0.05);
}

#[test]
fn pure_free_energy_matches_double_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let (h1, h2, g): (f64, f64, f64) = (rng.random_range(0.0..1.0), rng.random_range(0.0..0.6), rng.random_range(1.0..2.0));
        let curve = build_spectral_curve(h2, g, &CurveModel::Pure { w1: 1.0 }, &default_theta_grid(), &Budget::default()).unwrap();
        let f = curve.free_energy(h1).value;
        let d = pure_free_energy_integral(h1, h2, g, 1.0, 24);
        assert!((f - d).abs() < 1e-3, "({h1}, {h2}, {g}): {f} vs {d}");
    }
}

#[test]
fn disordered_curve_is_monotone_and_pinned() {
    let law = DisorderLaw::two_point_symmetric(0.5).unwrap();
    let budget = Budget { steps: 200_000, ..Budget::default() };
    let curve = build_spectral_curve(0.0, 1.0, &CurveModel::Disordered(law.clone()), &default_theta_grid(), &budget).unwrap();
    assert_eq!(curve.delta(), 0.0);
    assert!(curve.max_adjustment_sigmas() <= 3.0, "{}", curve.max_adjustment_sigmas());
    assert!(curve.nodes().windows(2).all(|w| w[1].regressed >= w[0].regressed));
    assert!((curve.h_c() - (1.0 + 2f64.sqrt()).ln()).abs() < 0.3);
    let hc = h_c(0.0, 1.0, &CurveModel::Disordered(law), &budget).unwrap();
    assert!((hc.value - curve.h_c()).abs() < 5.0 * hc.stderr + 1e-3);
    // convexity of F in H1
    let fs: Vec<_> = (0..=20).map(|i| curve.free_energy(0.05 * i as f64)).collect();
    for w in fs.windows(3) {
        let second = w[0].value - 2.0 * w[1].value + w[2].value;
        assert!(second >= -(w[0].error() + w[2].error()));
    }
}

#[test]
fn small_theta_log_decay() {
    let law = DisorderLaw::two_point_symmetric(1.0).unwrap();
    let grid = [0.0, 1e-3, 1e-2, 0.5, FRAC_PI_2];
    let curve = build_spectral_curve(0.0, 1.0, &CurveModel::Disordered(law), &grid, &Budget { steps: 1_000_000, ..Budget::default() }).unwrap();
    let ratio = curve.nodes()[1].regressed / curve.nodes()[2].regressed;
    assert!((ratio / (2.0 / 3.0) - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn delta_positive_off_axis() {
    let law = DisorderLaw::two_point_symmetric(1.0).unwrap();
    assert_eq!(delta(0.0, &law, &Budget::default()).unwrap().value, 0.0);
    let d = delta(0.1, &law, &Budget::new(400_000, 2)).unwrap();
    assert!(d.value > 5.0 * d.stderr, "{d:?}");
}

#[test]
fn grid_checks() {
    let m = CurveModel::Pure { w1: 1.0 };
    assert!(build_spectral_curve(0.0, 1.0, &m, &[0.1, FRAC_PI_2], &Budget::default()).is_err());
    assert!(build_spectral_curve(0.0, 0.5, &m, &default_theta_grid(), &Budget::default()).is_err());
    assert!(default_theta_grid().windows(2).all(|w| w[1] > w[0]));
}
