//! Acceptance criteria 1–15. Prints one PASS/FAIL line per criterion and
//! exits nonzero if a criterion fails that is not listed in `KNOWN_FAILING`.
//! Run a subset with `cargo test --test acceptance -- C4 C9`.

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use dimerlab::asymptotics::*;
use dimerlab::correlations::*;
use dimerlab::disorder::{sample_layers, DisorderLaw, LayeredSample, Row};
use dimerlab::kasteleyn::*;
use dimerlab::matprod::{lyapunov_rows, LyapMethod};
use dimerlab::poincare::property_suite;
use dimerlab::spectrum::*;
use dimerlab::Complex64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail with the current numerics; see the README.
const KNOWN_FAILING: [u32; 2] = [9, 11];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn random_field(l: usize, n: usize, h1: f64, h2: f64, rng: &mut ChaCha8Rng) -> WeightField {
    let t = TorusSpec::new(l, n).unwrap();
    let rows = (0..2 * n).map(|_| Row { w1: rng.random_range(0.3..2.5), w2: rng.random_range(0.3..2.5) }).collect();
    build_weight_field(t, &LayeredSample::from_rows(t.y_min(), rows).unwrap(), h1, h2).unwrap()
}

fn colored(t: TorusSpec, black: bool) -> Vec<Vertex> {
    t.vertex_list().into_iter().filter(|v| v.is_black() == black).collect()
}

/// Dense `K_τ` (rows white, columns black).
fn dense(wf: &WeightField, tau: (u8, u8)) -> DMatrix<Complex64> {
    let t = wf.torus();
    let (w, b) = (colored(t, false), colored(t, true));
    DMatrix::from_fn(w.len(), b.len(), |i, j| wf.entry(tau, w[i], b[j]))
}

const FIELDS: [(f64, f64); 4] = [(0.0, 0.0), (0.5, 0.1), (-1.2, 0.3), (0.2, -2.0)];

fn c1() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let rows: Vec<Row> = (0..6).map(|_| Row { w1: rng.random_range(0.3..2.5), w2: rng.random_range(0.3..2.5) }).collect();
        let t = TorusSpec::new(2, 3).unwrap();
        let layers = LayeredSample::from_rows(t.y_min(), rows).unwrap();
        for (h1, h2) in FIELDS {
            let wf = build_weight_field(t, &layers, h1, h2).unwrap();
            let z = partition_function_blocks(&wf).unwrap().log.exp();
            let bf = brute_force_partition(&wf).unwrap();
            worst = worst.max((z - bf).abs() / bf);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(worst <= 1e-10 && secs < 60.0, format!("max relative error {worst:.2e} over 20 cases, {secs:.2}s"))
}

fn c2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for (h1, h2) in FIELDS {
        let wf = random_field(4, 5, h1, h2, &mut rng);
        for tau in TAUS {
            let (d, _) = det_kasteleyn(&wf, tau).unwrap();
            let exact = dense(&wf, tau).determinant();
            worst = worst.max((d.to_complex() - exact).norm() / exact.norm());
        }
    }
    verdict(worst <= 1e-8, format!("max relative error {worst:.2e}, L=4 N=5, 4 fields x 4 tau"))
}

fn c3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let (mut entry, mut sums) = (0.0f64, 0.0f64);
    for (h1, h2) in FIELDS {
        let wf = random_field(2, 3, h1, h2, &mut rng);
        let t = wf.torus();
        let (w, b) = (colored(t, false), colored(t, true));
        for tau in TAUS {
            let inv = dense(&wf, tau).try_inverse().unwrap();
            for (i, wv) in w.iter().enumerate() {
                for (j, bv) in b.iter().enumerate() {
                    entry = entry.max((inverse_kasteleyn_entry(&wf, tau, *bv, *wv).unwrap() - inv[(j, i)]).norm());
                }
            }
        }
        for wv in &w {
            let p: f64 = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .map(|(dx, dy)| finite_edge_probability(&wf, &[Edge::between(*wv, Vertex::new(wv.x + dx, wv.y + dy)).unwrap()]).unwrap())
                .sum();
            sums = sums.max((p - 1.0).abs());
        }
    }
    verdict(entry <= 1e-9 && sums <= 1e-10, format!("max entry error {entry:.2e}, max |sum - 1| {sums:.2e}"))
}

fn c4() -> Verdict {
    let t0 = Instant::now();
    let rows = LayeredSample::constant(0, 1_000_000, 1.0, 1.0).unwrap();
    let (mut ok, mut worst_diff, mut worst_se) = (true, 0.0f64, 0.0f64);
    for k in 1..=12 {
        let theta = FRAC_PI_2 * k as f64 / 12.0;
        let e = lyapunov_rows(rows.rows(), theta, 0.0, 40, LyapMethod::Trace).unwrap();
        let d = (e.value - pure::lyapunov(theta, 1.0)).abs();
        // rounding in the 10⁶-fold product is not part of the batch-means error
        ok &= d <= 3.0 * e.stderr + 1e-12 && e.stderr <= 1e-3;
        worst_diff = worst_diff.max(d);
        worst_se = worst_se.max(e.stderr);
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(ok && secs < 120.0, format!("12 nodes, max |diff| {worst_diff:.1e}, max stderr {worst_se:.1e}, {secs:.1}s"))
}

fn c5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let grid = default_theta_grid();
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for _ in 0..10 {
        let (h1, h2, g) = (rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0), rng.random_range(1.0..2.0));
        let f = build_spectral_curve(h2, g, &CurveModel::Pure { w1: 1.0 }, &grid, &Budget::default()).unwrap().free_energy(h1).value;
        let (v, _) = pure::free_energy_torus(h1, h2, g, 1.0, 16);
        worst = worst.max((f - v).abs());
        lines.push(format!("({h1:.2},{h2:.2},{g:.2}):{:.1e}", (f - v).abs()));
    }
    verdict(worst <= 1e-3, format!("max |F - integral| {worst:.2e}  [{}]", lines.join(" ")))
}

fn c6() -> Verdict {
    let t0 = Instant::now();
    let window = (1e-3, 3e-2);
    let ds = geometric_grid(window, 10);
    let pure_fit = fit_points(&pure::pt_points(1.0, &ds), Some(window), 3.0).unwrap();
    let law = DisorderLaw::two_point_symmetric(0.5).unwrap();
    let curve = build_spectral_curve(0.0, 1.0, &CurveModel::Disordered(law), &default_theta_grid(), &Budget::new(1_000_000, 1)).unwrap();
    let hc = curve.h_c();
    let res: Vec<FreeEnergyResult> = ds.iter().map(|d| curve.free_energy(hc - d)).collect();
    let dis = pt_exponent(&res, hc, window).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        (pure_fit.exponent - 1.5).abs() <= 0.02 && (1.35..=1.65).contains(&dis.exponent) && secs <= 1800.0,
        format!("pure {:.4}, sigma=0.5 {:.4} ± {:.1e} ({} points), {secs:.1}s", pure_fit.exponent, dis.exponent, dis.stderr, dis.points),
    )
}

fn c7() -> Verdict {
    let t0 = Instant::now();
    let law = DisorderLaw::log_uniform_symmetric(1.0).unwrap();
    let grid = theta_grid(1e-7, 10, 24);
    let budget = Budget { steps: 4_000_000, boost_cap: 1.0, ..Budget::default() };
    let window = (1e-3, 3e-2);
    let above = gas_transition_exponent(&law, 1.5 * gamma_c(&law), window, 10, &grid, &budget).unwrap();
    let tuned = gas_transition_exponent(&law, gamma_for_alpha(&law, 0.5).unwrap(), window, 10, &grid, &budget).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let ok = (1.35..=1.65).contains(&above.fit.exponent) && (tuned.fit.exponent - tuned.analysis.beta).abs() <= 0.2 && (tuned.analysis.beta - 2.0).abs() < 1e-9;
    verdict(
        ok && secs <= 2700.0,
        format!(
            "gamma=1.5 gamma_c: {:.4} ± {:.4}; alpha=1/2 (gamma {:.4}): {:.4} ± {:.4} vs beta {:.3}, {secs:.1}s",
            above.fit.exponent, above.fit.stderr, tuned.analysis.gamma, tuned.fit.exponent, tuned.fit.stderr, tuned.analysis.beta
        ),
    )
}

fn c8() -> Verdict {
    let t0 = Instant::now();
    let eps: Vec<f64> = (3..=10).map(|k| 2f64.powi(-k)).collect();
    let b = ProductBudget::default();
    let inf = dh_benchmark(&ZLaw::LogUniform { lo: -2.0, hi: -0.5 }, &eps, &b).unwrap();
    let half = dh_benchmark(&ZLaw::log_uniform_with_alpha(-3.0, 0.5).unwrap(), &eps, &b).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let ok = inf.target == 2.0 && (inf.fit.exponent - 2.0).abs() <= 0.1 && (half.fit.exponent - 1.0).abs() <= 0.15;
    verdict(
        ok && secs <= 1200.0,
        format!("alpha=inf slope {:.4} ± {:.4}; alpha=1/2 slope {:.4} ± {:.4}, {secs:.1}s", inf.fit.exponent, inf.fit.stderr, half.fit.exponent, half.fit.stderr),
    )
}

fn c9() -> Verdict {
    let law = DisorderLaw::two_point_symmetric(1.0).unwrap();
    let grid = default_theta_grid();
    let p = essential_singularity_probe(&CurveModel::Disordered(law), &[0.5, 0.4, 0.3, 0.25, 0.2], &grid, &Budget::default()).unwrap();
    let (monotone, rel) = p.trend().unwrap();
    let probes: Vec<String> = p.rows.iter().map(|r| format!("{:.3}", r.probe)).collect();
    // constant weights: the onset is quadratic, so the probe falls to 0 and
    // its reciprocal grows without bound
    let hp = [0.4, 0.2, 0.1, 0.05, 0.02];
    let q = essential_singularity_probe(&CurveModel::Pure { w1: 1.0 }, &hp, &grid, &Budget::default()).unwrap();
    let inv: Vec<f64> = q.rows.iter().map(|r| 1.0 / r.probe).collect();
    let diverges = inv.windows(2).all(|w| w[1] > w[0]) && *inv.last().unwrap() > 5.0 && (q.rows.last().unwrap().log_ratio - 2.0).abs() < 0.2;
    verdict(
        monotone && rel <= 0.3 && diverges,
        format!(
            "probe [{}] monotone={monotone}, final {:.0}% from Var(log w2)=1; pure 1/probe [{}]",
            probes.join(", "),
            100.0 * rel,
            inv.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn c10() -> Verdict {
    let law = DisorderLaw::two_point_symmetric(1.0).unwrap();
    let a = delta(0.1, &law, &Budget::new(1_000_000, 1)).unwrap();
    let b = delta(0.01, &law, &Budget::new(1_000_000, 1)).unwrap();
    let c = delta(1e-4, &law, &Budget::new(10_000_000, 1)).unwrap();
    let scaled = c.value * 1e-4f64.ln().abs();
    let ok = a.value > 5.0 * a.stderr && b.value > 5.0 * b.stderr && (scaled - law.log_variance()).abs() <= 0.25 * law.log_variance();
    verdict(
        ok,
        format!(
            "Delta(0.1)={:.4}±{:.1e}, Delta(0.01)={:.4}±{:.1e}, Delta(1e-4)|log 1e-4|={scaled:.4}",
            a.value, a.stderr, b.value, b.stderr
        ),
    )
}

fn c11() -> Verdict {
    let law = DisorderLaw::two_point_symmetric(0.5).unwrap();
    let ys: Vec<i64> = (3..=20).map(|k: i64| k * k).collect();
    let (mut good, mut signs) = (0, true);
    let mut r2 = Vec::new();
    for seed in 1..=5 {
        let p = decay_profile(0.0, &law, seed, &ys, XRule::Zero, None, &QuadSpec::default()).unwrap();
        signs &= p.rows.iter().all(|r| r.cov.sign() == if (r.y + 1) % 2 == 0 { 1.0 } else { -1.0 });
        let pts: Vec<(f64, f64)> = p.rows.iter().map(|r| (r.y as f64, r.cov.value.abs())).collect();
        let f = fit_stretched(&pts).unwrap();
        if f.r_squared >= 0.9 && f.exponent > 0.0 {
            good += 1;
        }
        r2.push(format!("{:.3}", f.r_squared));
    }
    verdict(good >= 4 && signs, format!("{good}/5 seeds with r² >= 0.9 (r² = [{}]), sign pattern {signs}, odd y only (x=0)", r2.join(", ")))
}

/// Odd `y` near a geometric grid on `[10, 300]`.
fn odd_grid() -> Vec<i64> {
    let mut ys: Vec<i64> = geometric_grid((11.0, 299.0), 15).iter().map(|y| (y.round() as i64) | 1).collect();
    ys.dedup();
    ys
}

fn c12() -> Verdict {
    let ys = odd_grid();
    let grid = default_theta_grid();
    let pure_curve = build_spectral_curve(0.0, 1.0, &CurveModel::Pure { w1: 1.0 }, &grid, &Budget::default()).unwrap();
    let layers = LayeredSample::constant(-10_000, 20_400, 1.0, 1.0).unwrap();
    let p = decay_profile_on(0.3, &layers, &ys, XRule::Zero, Some(&pure_curve), &QuadSpec::default()).unwrap();
    let pure_fit = fit_power_law(&p.rows.iter().map(|r| (r.y as f64, r.cov.value.abs())).collect::<Vec<_>>(), None).unwrap();
    let law = DisorderLaw::two_point_symmetric(0.25).unwrap();
    let curve = build_spectral_curve(0.0, 1.0, &CurveModel::Disordered(law.clone()), &grid, &Budget::default()).unwrap();
    let d = decay_profile(0.3, &law, 1, &ys, XRule::Zero, Some(&curve), &QuadSpec::default()).unwrap();
    let dis_fit = fit_power_law(&d.rows.iter().map(|r| (r.y as f64, r.cov.value.abs())).collect::<Vec<_>>(), None).unwrap();
    let inside = |e: f64| (-2.3..=-1.7).contains(&e);
    verdict(
        inside(pure_fit.exponent) && inside(dis_fit.exponent),
        format!(
            "pure slope {:.4} (r² {:.4}), sigma=0.25 slope {:.4} (r² {:.4}), x=0, {} odd y in [{}, {}]",
            pure_fit.exponent,
            pure_fit.r_squared,
            dis_fit.exponent,
            dis_fit.r_squared,
            ys.len(),
            ys[0],
            ys[ys.len() - 1]
        ),
    )
}

fn torus_cov(sample: &LayeredSample, pair: EdgePair, l: usize, n: usize, h1: f64) -> f64 {
    let wf = build_weight_field(TorusSpec::new(l, n).unwrap(), sample, h1, 0.0).unwrap();
    let (e, e2) = pair.edges();
    finite_covariance(&wf, &e, &e2).unwrap()
}

fn c13() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(113);
    let law = DisorderLaw::two_point_symmetric(0.5).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for i in 0..5 {
        let pair = loop {
            if let Ok(p) = EdgePair::new(rng.random_range(-2..=2), rng.random_range(1..=4)) {
                break p;
            }
        };
        let seed = rng.random_range(1..1000u64);
        let h1 = if i % 2 == 0 { 0.0 } else { rng.random_range(0.1..0.5) };
        let sample = sample_layers(&law, -20_000..20_000, seed).unwrap();
        let inf = if h1 == 0.0 {
            covariance_h1_zero(pair, &sample, &QuadSpec::default()).unwrap()
        } else {
            let curve = build_spectral_curve(0.0, 1.0, &CurveModel::Disordered(law.clone()), &default_theta_grid(), &Budget::new(200_000, seed)).unwrap();
            covariance_liquid(pair, h1, &sample, &curve, &QuadSpec::default()).unwrap()
        };
        let big = torus_cov(&sample, pair, 128, 201, h1);
        let fe = (big - torus_cov(&sample, pair, 64, 201, h1)).abs() + (big - torus_cov(&sample, pair, 128, 101, h1)).abs();
        let diff = (inf.value - big).abs();
        let tol = 3.0 * (inf.error() + fe);
        ok &= diff <= tol;
        lines.push(format!("({},{}) seed {seed} H1 {h1:.3}: |diff| {diff:.1e} <= {tol:.1e}", pair.x(), pair.y()));
    }
    verdict(ok, lines.join("; "))
}

fn c14() -> Verdict {
    let t0 = Instant::now();
    let checks = property_suite(10_000, 114);
    let secs = t0.elapsed().as_secs_f64();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    verdict(failed.is_empty() && secs < 60.0, format!("{} checks x 10000 samples, failed {failed:?}, {secs:.1}s", checks.len()))
}

fn c15() -> Verdict {
    let law = DisorderLaw::two_point_symmetric(0.5).unwrap();
    let model = CurveModel::Disordered(law);
    let h1: Vec<f64> = (0..=75).map(|i| 0.02 * i as f64).collect();
    let mut ok = true;
    let mut lines = Vec::new();
    for (h2, g) in [(0.0, 1.0), (0.3, 1.0), (0.0, 1.3)] {
        let (c, res) = free_energy_curve(&h1, h2, g, &model, &default_theta_grid(), &Budget::default()).unwrap();
        let adj = c.max_adjustment_sigmas();
        let monotone = c.nodes().windows(2).all(|w| w[1].regressed >= w[0].regressed);
        let convex = res.windows(3).all(|w| {
            let ulp = 8.0 * f64::EPSILON * w[2].value.abs();
            w[2].value - 2.0 * w[1].value + w[0].value >= -(w[0].error() + 2.0 * w[1].error() + w[2].error() + ulp)
        });
        let frozen: Vec<&FreeEnergyResult> = res.iter().filter(|r| r.h1 >= c.h_c()).collect();
        let exact = !frozen.is_empty() && frozen.iter().all(|r| r.value == 0.5 * r.h1);
        ok &= adj <= 3.0 && monotone && convex && exact;
        lines.push(format!("(H2 {h2}, gamma {g}): adj {adj:.2} sd, convex {convex}, {} frozen points exact {exact}", frozen.len()));
    }
    verdict(ok, lines.join("; "))
}

fn main() {
    let criteria: [(u32, fn() -> Verdict); 15] =
        [(1, c1), (2, c2), (3, c3), (4, c4), (5, c5), (6, c6), (7, c7), (8, c8), (9, c9), (10, c10), (11, c11), (12, c12), (13, c13), (14, c14), (15, c15)];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.strip_prefix('C').and_then(|n| n.parse().ok())).collect();
    let mut unexpected = Vec::new();
    for (id, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let v = f();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        let known = if !v.pass && KNOWN_FAILING.contains(&id) { " (known)" } else { "" };
        println!("C{id:<2} {tag}{known} [{:.1}s] {}", t0.elapsed().as_secs_f64(), v.detail);
        if !v.pass && !KNOWN_FAILING.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
