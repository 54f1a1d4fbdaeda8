use approx::assert_relative_eq;
use dimerlab::asymptotics::*;
use dimerlab::disorder::DisorderLaw;
use dimerlab::spectrum::{build_spectral_curve, default_theta_grid, Budget, CurveModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_point(s: f64) -> DisorderLaw {
    DisorderLaw::two_point_symmetric(s).unwrap()
}

/// Root of `4α log γ = 2 log cosh(2ασ)` by plain bisection.
fn two_point_alpha(sigma: f64, gamma: f64) -> f64 {
    let g = |a: f64| 4.0 * a * gamma.ln() - 2.0 * (2.0 * a * sigma).cosh().ln();
    let (mut lo, mut hi) = (1e-9, 1.0);
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if g(m) > 0.0 {
            lo = m
        } else {
            hi = m
        }
    }
    lo
}

#[test]
fn critical_gamma() {
    assert_relative_eq!(gamma_c(&two_point(1.0)), 2f64.cosh().sqrt(), epsilon = 1e-12);
    assert_relative_eq!(gamma_c(&two_point(1.0)), 1.93963, epsilon = 1e-5);
    assert!(gamma_c(&two_point(0.05)) > 1.0);
    assert!(gamma_c(&two_point(1e-4)) - 1.0 < 1e-7);
    let lu = DisorderLaw::log_uniform_symmetric(1.0).unwrap();
    assert_relative_eq!(gamma_c(&lu), (2f64.sinh() / 2.0).sqrt(), epsilon = 1e-12);
}

#[test]
fn alpha_root() {
    for law in [two_point(1.0), two_point(0.3), DisorderLaw::log_uniform_symmetric(0.8).unwrap()] {
        assert_relative_eq!(alpha_gamma(&law, gamma_c(&law)).unwrap(), 1.0, epsilon = 1e-10);
        let gc = gamma_c(&law);
        let gs = [0.1, 0.3, 0.6, 1.0, 1.5].map(|t| 1.0 + t * (gc - 1.0));
        let a: Vec<f64> = gs.iter().map(|&g| alpha_gamma(&law, g).unwrap()).collect();
        assert!(a.windows(2).all(|w| w[1] > w[0]), "{a:?}");
        assert_relative_eq!(alpha_gamma(&law, gamma_for_alpha(&law, 0.5).unwrap()).unwrap(), 0.5, epsilon = 1e-10);
    }
    let g = 0.25f64.exp();
    assert_relative_eq!(alpha_gamma(&two_point(1.0), g).unwrap(), two_point_alpha(1.0, g), epsilon = 1e-9);
    // Monte Carlo moments at the root
    let a = two_point_alpha(1.0, g);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 200_000;
    let (mut p, mut m) = (0.0, 0.0);
    for _ in 0..n {
        let l: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        p += (2.0 * a * l).exp();
        m += (-2.0 * a * l).exp();
    }
    assert_relative_eq!((p / n as f64) * (m / n as f64), g.powf(4.0 * a), max_relative = 2e-2);
    assert!(alpha_gamma(&two_point(1.0), 1.0).is_err());
    assert_eq!(alpha_gamma(&two_point(1.0), 1.01 * 1f64.exp()).unwrap(), f64::INFINITY);
}

#[test]
fn alpha_near_one_trend() {
    let law = two_point(0.5);
    let ratios: Vec<f64> = [1.01, 1.001, 1.0001].iter().map(|g: &f64| alpha_gamma(&law, *g).unwrap() / (g.ln() / law.log_variance())).collect();
    assert!(ratios.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()), "{ratios:?}");
    assert!((ratios[2] - 1.0).abs() < 1e-2);
    let b = beta_gamma(&law, 1.0001).unwrap();
    assert_relative_eq!(b / (law.log_variance() / (2.0 * 1.0001f64.ln())), 1.0, epsilon = 1e-2);
}

#[test]
fn beta_values() {
    let law = two_point(1.0);
    let gc = gamma_c(&law);
    for g in [gc, 1.2 * gc, 5.0] {
        assert_eq!(beta_gamma(&law, g).unwrap(), 1.5);
    }
    assert_eq!(beta_from_alpha(0.5), 2.0);
    assert_eq!(beta_from_alpha(f64::INFINITY), 1.5);
    for g in [1.05, 1.3, 0.9 * gc, gc, 2.0 * gc] {
        let a = gamma_analysis(&law, g).unwrap();
        let piecewise = if g >= gc { 1.5 } else { 1.0 + 0.5 / a.alpha };
        assert!((a.beta - piecewise).abs() < 1e-9, "{g}: {} vs {piecewise}", a.beta);
        assert!(a.beta >= 1.5);
    }
}

#[test]
fn power_law_fits() {
    let pts: Vec<(f64, f64)> = (1..=10).map(|i| i as f64 * 0.1).map(|x: f64| (x, x.powf(1.5))).collect();
    let f = fit_power_law(&pts, None).unwrap();
    assert_relative_eq!(f.exponent, 1.5, epsilon = 1e-12);
    assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<(f64, f64)> = (0..16).map(|i| 1e-3 * 1.5f64.powi(i)).map(|x| (x, 3.0 * x * x * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))).collect();
    let f = fit_power_law(&pts, None).unwrap();
    assert!((f.exponent - 2.0).abs() < 0.02);
    assert!(fit_power_law(&pts[..1], None).is_err());
    assert!(fit_power_law(&[(1.0, 1.0), (2.0, -1.0)], None).is_err());
    let w = fit_power_law(&pts, Some((1e-2, 1e-1))).unwrap();
    assert!(w.window.0 >= 1e-2 && w.window.1 <= 1e-1 && w.points < pts.len());
}

#[test]
fn stretched_fits() {
    let pts: Vec<(f64, f64)> = (1..=20).map(|i| (i as f64 * i as f64, (-2.0 * i as f64).exp())).collect();
    assert_relative_eq!(fit_stretched(&pts).unwrap().exponent, 2.0, epsilon = 1e-12);
    // inverse-square data over a wide range is curved in √y
    let pts: Vec<(f64, f64)> = (0..30).map(|i| 10f64 * 1.3f64.powi(i)).map(|y| (y, y.powi(-2))).collect();
    let liquid = fit_stretched(&pts).unwrap();
    let stretched = fit_stretched(&pts.iter().map(|p| (p.0, (-p.0.sqrt()).exp())).collect::<Vec<_>>()).unwrap();
    assert!(liquid.r_squared < 0.9 && !liquid.flags.is_empty(), "{}", liquid.r_squared);
    assert!(stretched.flags.is_empty());
    assert!(fit_stretched(&[(1.0, 0.0), (4.0, 1.0)]).is_err());
}

#[test]
fn z_laws() {
    let z = ZLaw::log_uniform_with_alpha(-3.0, 0.5).unwrap();
    assert_relative_eq!(z.log_moment(0.5), 0.0, epsilon = 1e-12);
    assert_relative_eq!(z.alpha().unwrap(), 0.5, epsilon = 1e-9);
    assert!(z.mean_log() < 0.0);
    if let ZLaw::LogUniform { lo, hi } = z {
        // E √Z by midpoint rule
        let n = 100_000;
        let m: f64 = (0..n).map(|i| (0.5 * (lo + (hi - lo) * (i as f64 + 0.5) / n as f64)).exp()).sum::<f64>() / n as f64;
        assert_relative_eq!(m, 1.0, epsilon = 1e-8);
    }
    assert_eq!(ZLaw::LogUniform { lo: -2.0, hi: -0.5 }.alpha().unwrap(), f64::INFINITY);
    assert!(ZLaw::LogUniform { lo: -1.0, hi: 2.0 }.alpha().is_err());
    let t = ZLaw::TwoPoint { a: 2.0, b: 0.25, p: 0.5 };
    let a = t.alpha().unwrap();
    assert_relative_eq!(0.5 * 2f64.powf(a) + 0.5 * 0.25f64.powf(a), 1.0, epsilon = 1e-12);
}

#[test]
fn dh_small_budget() {
    let b = ProductBudget { steps: 400_000, blocks: 20, seed: 3 };
    let eps: Vec<f64> = (3..=8).map(|k| 2f64.powi(-k)).collect();
    let r = dh_benchmark(&ZLaw::LogUniform { lo: -2.0, hi: -0.5 }, &eps, &b).unwrap();
    assert!((r.fit.exponent - 2.0).abs() < 0.1, "{}", r.fit.exponent);
    assert_eq!(r.target, 2.0);
    let zero = dh_benchmark(&ZLaw::LogUniform { lo: -2.0, hi: -0.5 }, &[0.0, 0.1, 0.05], &b).unwrap();
    assert!(zero.points[0].1.value.abs() <= zero.points[0].1.stderr + 1e-12);
    assert!(dh_benchmark(&ZLaw::LogUniform { lo: -0.5, hi: 1.0 }, &eps, &b).is_err());
}

#[test]
fn pure_forms() {
    assert_relative_eq!(pure::h_c(1.0), (1.0 + 2f64.sqrt()).ln(), epsilon = 1e-15);
    for w1 in [0.5, 1.0, 2.0] {
        let t = std::f64::consts::FRAC_PI_2 - 1e-4;
        let ratio = (pure::h_c(w1) - pure::lyapunov(t, w1)) / 1e-8;
        assert_relative_eq!(ratio, pure::endpoint_curvature(w1), max_relative = 1e-4);
    }
    // pipeline calibration on exact data
    let f = fit_points(&pure::pt_points(1.0, &geometric_grid((1e-4, 1e-2), 10)), None, 3.0).unwrap();
    assert!((f.exponent - 1.5).abs() < 0.02, "{}", f.exponent);
    // the Lyapunov path and the torus integral
    let curve = build_spectral_curve(0.0, 1.0, &CurveModel::Pure { w1: 1.0 }, &default_theta_grid(), &Budget::default()).unwrap();
    for h in [0.0, 0.3, 0.7, 1.2] {
        let (v, e) = pure::free_energy_torus(h, 0.0, 1.0, 1.0, 16);
        assert!((curve.free_energy(h).value - v).abs() < 1e-3 + e, "{h}");
        let (fr, fe) = pure::excess_over_frozen(h, 1.0);
        assert!((curve.free_energy(h).excess_over_frozen - fr).abs() < 1e-5 + fe);
    }
    // gaseous plateau on (−log γ, log γ)
    let g: f64 = 1.6;
    let (a, ea) = pure::free_energy_torus(0.0, 0.0, g, 1.0, 16);
    let (b, eb) = pure::free_energy_torus(0.6 * g.ln(), 0.0, g, 1.0, 16);
    assert!((a - b).abs() < 1e-6 + ea + eb, "{a} {b}");
    let (c, _) = pure::free_energy_torus(1.3 * g.ln(), 0.0, g, 1.0, 16);
    assert!(c > a + 1e-4);
}

#[test]
fn pure_probe_is_quadratic() {
    let h = [0.4, 0.2, 0.1, 0.05, 0.02];
    let p = essential_singularity_probe(&CurveModel::Pure { w1: 1.0 }, &h, &default_theta_grid(), &Budget::default()).unwrap();
    assert!(p.target.is_none() && p.trend().is_none());
    assert!(p.rows.windows(2).all(|w| w[1].probe < w[0].probe));
    let (a, b) = (&p.rows[3], &p.rows[4]);
    let slope = (b.excess.ln() - a.excess.ln()) / (b.h1.ln() - a.h1.ln());
    assert!((slope - 2.0).abs() < 0.05, "{slope}");
    assert!(essential_singularity_probe(&CurveModel::Pure { w1: 1.0 }, &[0.6], &default_theta_grid(), &Budget::default()).is_err());
}

#[test]
fn delta_gamma_probe_runs_only_when_flagged() {
    let law = two_point(0.5);
    let b = ProductBudget { steps: 200_000, blocks: 20, seed: 4 };
    assert!(delta_gamma_probe(&law, 1.3, &[0.1], &b, false).is_err());
    let p = delta_gamma_probe(&law, 1.3, &[0.0, 0.05, 0.1, 0.2], &b, true).unwrap();
    assert_eq!(p.label, "conjecture-probe");
    assert!((p.at_zero.value - 1.3f64.ln()).abs() < 5.0 * p.at_zero.stderr + 1e-4, "{:?}", p.at_zero);
    assert!(p.conjectured_exponent.is_some());
    let q = delta_gamma_probe(&law, 1.0, &[0.1], &b, true).unwrap();
    let d = dimerlab::spectrum::delta(0.1, &law, &Budget { steps: 200_000, blocks: 20, seed: 4, boost_cap: 1.0 }).unwrap();
    assert_eq!(q.rows[0].1, d);
    assert_eq!(q.at_zero.value, 0.0);
}
