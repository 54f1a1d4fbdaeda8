//! Built-in oracle suite: transfer-matrix determinants against enumeration,
//! constant-weight closed forms, and the hyperbolic contraction properties.

use std::f64::consts::FRAC_PI_2;

use dimerlab::asymptotics::{fit_points, geometric_grid, pure};
use dimerlab::disorder::{sample_layers, DisorderLaw, LayeredSample, W1Law, W2Law};
use dimerlab::kasteleyn::{
    brute_force_edge_probability, brute_force_partition, build_weight_field, finite_edge_probability, partition_function_blocks, Edge, TorusSpec,
};
use dimerlab::matprod::{lyapunov_rows, LyapMethod};
use dimerlab::poincare::property_suite;
use dimerlab::spectrum::{build_spectral_curve, default_theta_grid, pure_lyapunov, Budget, CurveModel};
use dimerlab::Result;

use crate::config::Config;
use crate::experiments::Report;
use crate::output::{Cell, Table};

/// Poincaré samples per run.
pub const PROPERTY_SAMPLES: usize = 2000;

const FIELDS: [(f64, f64); 4] = [(0.0, 0.0), (0.4, -0.3), (-0.8, 0.6), (1.2, 0.2)];

struct Check {
    item: String,
    passed: bool,
    max_error: f64,
    tolerance: f64,
    detail: String,
}

impl Check {
    fn new(item: &str, max_error: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { item: item.into(), passed: max_error <= tolerance, max_error, tolerance, detail: detail.into() }
    }
}

/// Rows with random `w1` and `w2` for a small torus.
fn random_rows(torus: TorusSpec, seed: u64) -> Result<LayeredSample> {
    let law = DisorderLaw::new(W2Law::LogUniform { lo: 0.5, hi: 2.0 }, W1Law::Uniform { lo: 0.5, hi: 2.0 })?;
    sample_layers(&law, torus.y_min()..torus.y_max() + 1, seed)
}

fn kasteleyn_checks(seed: u64) -> Result<Vec<Check>> {
    let small = TorusSpec::new(2, 3)?;
    let (mut z_err, mut p_err, mut cases) = (0.0f64, 0.0f64, 0);
    for k in 0..5 {
        let rows = random_rows(small, seed.wrapping_add(k))?;
        for (h1, h2) in FIELDS {
            let wf = build_weight_field(small, &rows, h1, h2)?;
            let z = partition_function_blocks(&wf)?;
            z_err = z_err.max((z.log - brute_force_partition(&wf)?.ln()).abs());
            let probe = [Edge::horizontal(1, 0)?, Edge::vertical(2, 1)?, Edge::horizontal(3, 2)?, Edge::vertical(1, -1)?];
            for e in &probe {
                p_err = p_err.max((finite_edge_probability(&wf, &[*e])? - brute_force_edge_probability(&wf, &[*e])?).abs());
            }
            for pair in [[probe[0], probe[2]], [probe[1], probe[3]], [probe[0], probe[3]]] {
                p_err = p_err.max((finite_edge_probability(&wf, &pair)? - brute_force_edge_probability(&wf, &pair)?).abs());
            }
            cases += 1;
        }
    }
    let big = TorusSpec::new(4, 5)?;
    let wf = build_weight_field(big, &random_rows(big, seed)?, 0.3, -0.2)?;
    let mut sum_err = 0.0f64;
    for v in big.vertex_list() {
        let incident = [Edge::horizontal(v.x, v.y)?, Edge::horizontal(v.x - 1, v.y)?, Edge::vertical(v.x, v.y)?, Edge::vertical(v.x, v.y - 1)?];
        let mut s = 0.0;
        for e in &incident {
            s += finite_edge_probability(&wf, &[*e])?;
        }
        sum_err = sum_err.max((s - 1.0).abs());
    }
    Ok(vec![
        Check::new("kasteleyn-log-z-vs-enumeration", z_err, 1e-10, format!("4x6 torus, {cases} weight fields")),
        Check::new("edge-probability-vs-enumeration", p_err, 1e-10, format!("4x6 torus, {cases} weight fields, single edges and pairs")),
        Check::new("edge-probability-sum-rule", sum_err, 1e-10, format!("8x10 torus, all {} vertices", big.vertices())),
    ])
}

fn pure_checks() -> Result<Vec<Check>> {
    let w1 = 1.0;
    let rows = LayeredSample::constant(0, 20_000, w1, 1.0)?;
    let (mut radius, mut mc) = (0.0f64, 0.0f64);
    for theta in [0.05, 0.3, 0.8, 1.3, FRAC_PI_2] {
        let exact = pure::lyapunov(theta, w1);
        radius = radius.max((pure_lyapunov(theta, 0.0, 1.0, w1) - exact).abs());
        let e = lyapunov_rows(rows.rows(), theta, 0.0, 20, LyapMethod::Trace)?;
        mc = mc.max((e.value - exact).abs());
    }
    let curve = build_spectral_curve(0.0, 1.0, &CurveModel::Pure { w1 }, &default_theta_grid(), &Budget::default())?;
    let mut torus = 0.0f64;
    for h in [0.0, 0.3, 0.7, 1.2] {
        let (v, e) = pure::free_energy_torus(h, 0.0, 1.0, w1, 16);
        torus = torus.max((curve.free_energy(h).value - v).abs() - e);
    }
    let window = (1e-3, 3e-2);
    let fit = fit_points(&pure::pt_points(w1, &geometric_grid(window, 10)), Some(window), 3.0)?;
    Ok(vec![
        Check::new("pure-spectral-radius", radius, 1e-12, "closed-form curve vs eigenvalue formula"),
        Check::new("pure-lyapunov-product", mc, 1e-6, "20000 constant rows, trace estimate"),
        Check::new("pure-free-energy-torus", torus.max(0.0), 1e-3, "curve integral vs torus average of log|P|"),
        Check::new("pure-pt-exponent", (fit.exponent - 1.5).abs(), 0.02, format!("exponent {:.5}", fit.exponent)),
    ])
}

pub fn run(cfg: &Config) -> Result<Report> {
    let mut rep = Report::default();
    rep.seed("random weight fields", cfg.seed);
    rep.seed("poincare samples", cfg.seed);
    let mut checks = kasteleyn_checks(cfg.seed)?;
    checks.extend(pure_checks()?);
    for p in property_suite(PROPERTY_SAMPLES, cfg.seed) {
        let item = format!("poincare-{}", p.name);
        checks.push(Check { item, passed: p.passed(), max_error: p.max_violation, tolerance: p.tolerance, detail: format!("{} samples", p.samples) });
    }
    let mut t = Table::new("validate.csv", &["item", "passed", "value", "tolerance", "detail"]);
    for c in &checks {
        t.push(vec![c.item.clone().into(), c.passed.into(), c.max_error.into(), c.tolerance.into(), Cell::S(c.detail.clone())]);
        if !c.passed {
            rep.failures.push(c.item.clone());
        }
    }
    rep.tables.push(t);
    Ok(rep)
}
