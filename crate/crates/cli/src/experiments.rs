//! One function per experiment. Each returns the tables to write; numeric
//! errors come back as `dimerlab::Error` and are wrapped by the caller.

use dimerlab::asymptotics::{
    dh_benchmark, delta_gamma_probe, essential_singularity_probe, fit_points, fit_power_law, fit_stretched, gamma_c, gamma_for_alpha,
    gas_transition_exponent, geometric_grid, pt_exponent, pure, ExponentFit, FitPoint, ProductBudget,
};
use dimerlab::correlations::{decay_profile, decay_profile_on, DecayProfile};
use dimerlab::disorder::{sample_layers, LayeredSample};
use dimerlab::kasteleyn::{
    brute_force_partition, build_weight_field, finite_covariance, finite_edge_probability, finite_free_energy_density, partition_function_blocks,
    Edge, TorusSpec, BRUTE_FORCE_LIMIT, TAUS,
};
use dimerlab::spectrum::{build_spectral_curve, free_energy_curve, CurveModel, FreeEnergyResult, Phase, SpectralCurve};
use dimerlab::{Error, Result};
use rayon::prelude::*;

use crate::config::{Config, Experiment};
use crate::output::{Cell, Table, TaskSeed};

/// Full edge and covariance tables are written up to this many vertices.
pub const EDGE_TABLE_LIMIT: usize = 4096;

#[derive(Debug, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub seeds: Vec<TaskSeed>,
    pub warnings: Vec<String>,
    /// Failed validation items; non-empty means exit status 4.
    pub failures: Vec<String>,
}

impl Report {
    pub(crate) fn seed(&mut self, task: impl Into<String>, seed: u64) {
        self.seeds.push(TaskSeed { task: task.into(), seed });
    }
}

pub fn run(experiment: Experiment, cfg: &Config) -> Result<Report> {
    match experiment {
        Experiment::LyapCurve => lyap_curve(cfg),
        Experiment::FreeEnergy => free_energy(cfg),
        Experiment::PhaseDiagram => phase_diagram(cfg),
        Experiment::Correlations => correlations(cfg),
        Experiment::ExactTorus => exact_torus(cfg),
        Experiment::PtFit => pt_fit(cfg),
        Experiment::GasFit => gas_fit(cfg),
        Experiment::DhBench => dh_bench(cfg),
        Experiment::EssentialSingularity => essential(cfg),
        Experiment::DeltaProbe => delta_probe(cfg),
        Experiment::Validate => crate::validate::run(cfg),
    }
}

fn row<const N: usize>(cells: [Cell; N]) -> Vec<Cell> {
    cells.into()
}

fn seed_for_curves(report: &mut Report, cfg: &Config, what: &str) {
    if matches!(cfg.model(), Ok(CurveModel::Disordered(_))) {
        report.seed(what, cfg.seed);
    }
}

fn curve_warnings(report: &mut Report, c: &SpectralCurve) {
    let s = c.max_adjustment_sigmas();
    if s > 3.0 {
        report.warnings.push(format!("H2 = {}: monotone regression moved a node by {s:.1} stderr", c.h2()));
    }
}

fn method_name(m: dimerlab::matprod::LyapMethod) -> &'static str {
    match m {
        dimerlab::matprod::LyapMethod::Norm => "norm",
        dimerlab::matprod::LyapMethod::Trace => "trace",
    }
}

fn lyap_curve(cfg: &Config) -> Result<Report> {
    let model = cfg.model()?;
    let grid = cfg.theta_grid();
    let budget = cfg.curve_budget();
    let mut rep = Report::default();
    let mut t = Table::new("lyap_curve.csv", &["h2", "gamma", "theta", "lyapunov", "stderr", "raw", "steps", "method"]);
    for h2 in cfg.h2_list() {
        let c = build_spectral_curve(h2, cfg.gamma(), &model, &grid, &budget)?;
        curve_warnings(&mut rep, &c);
        for n in c.nodes() {
            t.push(row([
                h2.into(),
                cfg.gamma().into(),
                n.theta.into(),
                n.regressed.into(),
                n.estimate.stderr.into(),
                n.estimate.value.into(),
                n.estimate.steps.into(),
                method_name(n.estimate.method).into(),
            ]));
        }
    }
    seed_for_curves(&mut rep, cfg, "curve realization (shared by all H2)");
    rep.tables.push(t);
    Ok(rep)
}

/// Region label. With constant weights a flat interval of zero width
/// (`Δ = 0`, `H2 ≠ 0`) lies inside the liquid region.
fn phase_name(r: &FreeEnergyResult, h1: f64, h2: f64, c: &SpectralCurve) -> &'static str {
    let degenerate = matches!(c.model(), CurveModel::Pure { .. }) && c.delta() <= 1e-12;
    match r.phase_label {
        Phase::FlatC if degenerate && h2 != 0.0 => "liquid",
        Phase::FlatC if h2 > 0.0 => "C+",
        Phase::FlatC if h2 < 0.0 => "C-",
        Phase::FlatC => "C",
        Phase::Liquid => "liquid",
        Phase::Frozen if h1 >= 0.0 => "frozen+",
        Phase::Frozen => "frozen-",
    }
}

fn h1_list(cfg: &Config) -> Vec<f64> {
    cfg.grid.h1.clone().unwrap_or_default()
}

fn free_energy(cfg: &Config) -> Result<Report> {
    let model = cfg.model()?;
    let grid = cfg.theta_grid();
    let budget = cfg.curve_budget();
    let h1s = h1_list(cfg);
    let mut rep = Report::default();
    let mut t = Table::new(
        "free_energy.csv",
        &[
            "h1",
            "h2",
            "gamma",
            "free_energy",
            "quadrature_error",
            "mc_error",
            "error",
            "phase",
            "theta_c",
            "excess_over_flat",
            "excess_over_flat_error",
            "excess_over_frozen",
            "excess_over_frozen_error",
        ],
    );
    for h2 in cfg.h2_list() {
        let (c, res) = free_energy_curve(&h1s, h2, cfg.gamma(), &model, &grid, &budget)?;
        curve_warnings(&mut rep, &c);
        for (&h1, r) in h1s.iter().zip(&res) {
            t.push(row([
                h1.into(),
                h2.into(),
                cfg.gamma().into(),
                r.value.into(),
                r.quadrature_error.into(),
                r.mc_error.into(),
                r.error().into(),
                phase_name(r, h1, h2, &c).into(),
                r.theta_c.into(),
                r.excess_over_flat.into(),
                r.excess_over_flat_error.into(),
                r.excess_over_frozen.into(),
                r.excess_over_frozen_error.into(),
            ]));
        }
    }
    seed_for_curves(&mut rep, cfg, "curve realization (shared by all H2)");
    rep.tables.push(t);
    Ok(rep)
}

fn phase_diagram(cfg: &Config) -> Result<Report> {
    let model = cfg.model()?;
    let grid = cfg.theta_grid();
    let budget = cfg.curve_budget();
    let h1s = h1_list(cfg);
    let mut rep = Report::default();
    let mut t = Table::new("phase_diagram.csv", &["h1", "h2", "free_energy", "error", "phase", "theta_c"]);
    let mut b = Table::new("phase_boundaries.csv", &["h2", "delta", "delta_stderr", "h_c", "h_c_stderr"]);
    for h2 in cfg.h2_list() {
        let (c, res) = free_energy_curve(&h1s, h2, cfg.gamma(), &model, &grid, &budget)?;
        curve_warnings(&mut rep, &c);
        let (first, last) = (&c.nodes()[0], &c.nodes()[c.nodes().len() - 1]);
        b.push(row([h2.into(), c.delta().into(), first.estimate.stderr.into(), c.h_c().into(), last.estimate.stderr.into()]));
        for (&h1, r) in h1s.iter().zip(&res) {
            t.push(row([h1.into(), h2.into(), r.value.into(), r.error().into(), phase_name(r, h1, h2, &c).into(), r.theta_c.into()]));
        }
    }
    seed_for_curves(&mut rep, cfg, "curve realization (shared by all H2)");
    rep.tables.push(t);
    rep.tables.push(b);
    Ok(rep)
}

fn fit_row(kind: &str, f: &ExponentFit) -> Vec<Cell> {
    row([
        kind.into(),
        f.exponent.into(),
        f.stderr.into(),
        f.intercept.into(),
        f.r_squared.into(),
        f.points.into(),
        f.excluded.len().into(),
        f.flags.join("; ").into(),
    ])
}

const FIT_HEADER: [&str; 8] = ["fit", "exponent", "stderr", "intercept", "r_squared", "points", "excluded", "flags"];

fn correlations(cfg: &Config) -> Result<Report> {
    let model = cfg.model()?;
    let h1 = h1_list(cfg)[0];
    let ys = cfg.grid.y.clone().unwrap_or_default();
    let spec = cfg.quad_spec();
    let mut rep = Report::default();
    let curve = if h1 != 0.0 { Some(build_spectral_curve(0.0, 1.0, &model, &cfg.theta_grid(), &cfg.curve_budget())?) } else { None };
    let profile: DecayProfile = match &model {
        CurveModel::Pure { w1 } => {
            let cap = spec.max_layers as i64;
            let y_max = ys.iter().copied().max().unwrap_or(0).max(0);
            let layers = LayeredSample::constant(-cap, (2 * cap + y_max + 1) as usize, *w1, 1.0)?;
            decay_profile_on(h1, &layers, &ys, cfg.x_rule(), curve.as_ref(), &spec)?
        }
        CurveModel::Disordered(law) => {
            rep.seed("layer realization", cfg.seed);
            if curve.is_some() {
                rep.seed("curve realization", cfg.seed);
            }
            decay_profile(h1, law, cfg.seed, &ys, cfg.x_rule(), curve.as_ref(), &spec)?
        }
    };
    rep.warnings.extend(profile.warnings.iter().cloned());
    let mut t = Table::new(
        "correlations.csv",
        &["y", "x", "covariance", "abs", "sign", "quad_error", "vec_error", "curve_error", "error", "layers_used"],
    );
    for r in &profile.rows {
        let c = &r.cov;
        t.push(row([
            r.y.into(),
            r.x.into(),
            c.value.into(),
            c.value.abs().into(),
            c.sign().into(),
            c.quad_error.into(),
            c.vec_error.into(),
            c.curve_error.into(),
            c.error().into(),
            c.layers_used.into(),
        ]));
    }
    let resolved: Vec<(f64, f64)> =
        profile.rows.iter().filter(|r| r.cov.value.abs() > 3.0 * r.cov.error()).map(|r| (r.y as f64, r.cov.value.abs())).collect();
    let mut s = Table::new("correlations_fit.csv", &FIT_HEADER);
    for (kind, fit) in [("power", fit_power_law(&resolved, None)), ("stretched", fit_stretched(&resolved))] {
        match fit {
            Ok(f) => s.push(fit_row(kind, &f)),
            Err(e) => rep.warnings.push(format!("{kind} fit skipped: {e}")),
        }
    }
    rep.tables.push(t);
    rep.tables.push(s);
    Ok(rep)
}

fn exact_torus(cfg: &Config) -> Result<Report> {
    let tc = cfg.torus.as_ref().expect("validated");
    let torus = TorusSpec::new(tc.l, tc.n)?;
    let mut rep = Report::default();
    let layers = match cfg.model()? {
        CurveModel::Pure { w1 } => LayeredSample::constant(torus.y_min(), 2 * tc.n, w1, 1.0)?,
        CurveModel::Disordered(law) => {
            rep.seed("torus rows", cfg.seed);
            sample_layers(&law, torus.y_min()..torus.y_max() + 1, cfg.seed)?
        }
    };
    let wf = build_weight_field(torus, &layers, tc.h1, tc.h2)?;
    let pf = partition_function_blocks(&wf)?;
    if pf.cancellation {
        rep.warnings.push(format!("{:.1} digits lost combining the four determinants", pf.digits_lost));
    }
    let signs = dimerlab::kasteleyn::calibrated_signs()?;
    let mut terms = Table::new("exact_torus_terms.csv", &["tau1", "tau2", "sign", "log_abs", "phase_re", "phase_im"]);
    for (i, tau) in TAUS.into_iter().enumerate() {
        let d = pf.terms[i];
        terms.push(row([
            (tau.0 as i64).into(),
            (tau.1 as i64).into(),
            signs.get(tau).into(),
            d.log_abs().into(),
            d.mant.re.into(),
            d.mant.im.into(),
        ]));
    }
    let brute = if torus.vertices() <= BRUTE_FORCE_LIMIT { brute_force_partition(&wf)?.ln() } else { f64::NAN };
    let mut s = Table::new("exact_torus.csv", &["l", "n", "h1", "h2", "log_z", "free_energy_density", "digits_lost", "cancellation", "log_z_enumerated"]);
    s.push(row([
        tc.l.into(),
        tc.n.into(),
        tc.h1.into(),
        tc.h2.into(),
        pf.log.into(),
        finite_free_energy_density(&wf)?.into(),
        pf.digits_lost.into(),
        pf.cancellation.into(),
        brute.into(),
    ]));
    rep.tables.push(s);
    rep.tables.push(terms);
    if torus.vertices() > EDGE_TABLE_LIMIT {
        rep.warnings.push(format!("{} vertices: edge tables skipped (limit {EDGE_TABLE_LIMIT})", torus.vertices()));
        return Ok(rep);
    }
    let mut edges = Vec::new();
    for v in torus.vertex_list() {
        edges.push(("horizontal", v.x, v.y, Edge::horizontal(v.x, v.y)?));
        edges.push(("vertical", v.x, v.y, Edge::vertical(v.x, v.y)?));
    }
    let reference = Edge::horizontal(0, 0)?;
    let reference_wrapped = Edge { black: torus.wrap(reference.black), white: torus.wrap(reference.white) };
    let values: Vec<(f64, Option<f64>)> = edges
        .par_iter()
        .map(|(_, _, _, e)| {
            let p = finite_edge_probability(&wf, &[*e])?;
            let wrapped = Edge { black: torus.wrap(e.black), white: torus.wrap(e.white) };
            let c = if wrapped == reference_wrapped { None } else { Some(finite_covariance(&wf, &reference, e)?) };
            Ok((p, c))
        })
        .collect::<Result<_>>()?;
    let mut p = Table::new("edge_probabilities.csv", &["orientation", "x", "y", "probability"]);
    let mut c = Table::new("covariances.csv", &["orientation", "x", "y", "covariance"]);
    for ((o, x, y, _), (pv, cv)) in edges.iter().zip(values) {
        p.push(row([(*o).into(), (*x).into(), (*y).into(), pv.into()]));
        if let Some(cv) = cv {
            c.push(row([(*o).into(), (*x).into(), (*y).into(), cv.into()]));
        }
    }
    rep.tables.push(p);
    rep.tables.push(c);
    Ok(rep)
}

fn fit_window(cfg: &Config) -> ((f64, f64), usize) {
    let f = cfg.fit.as_ref().expect("validated");
    ((f.window[0], f.window[1]), f.points)
}

fn pt_fit(cfg: &Config) -> Result<Report> {
    let model = cfg.model()?;
    let (window, n) = fit_window(cfg);
    let ds = geometric_grid(window, n);
    let mut rep = Report::default();
    let (h_c, points, fit) = match &model {
        CurveModel::Pure { w1 } => {
            let pts = pure::pt_points(*w1, &ds);
            let fit = fit_points(&pts, Some(window), 3.0)?;
            (pure::h_c(*w1), pts, fit)
        }
        CurveModel::Disordered(_) => {
            rep.seed("curve realization", cfg.seed);
            let c = build_spectral_curve(0.0, 1.0, &model, &cfg.theta_grid(), &cfg.curve_budget())?;
            curve_warnings(&mut rep, &c);
            let h_c = c.h_c();
            if window.1 >= h_c {
                return Err(Error::Precondition(format!("fit window reaches H1 <= 0 (H_c = {h_c})")));
            }
            let res: Vec<FreeEnergyResult> = ds.iter().map(|d| c.free_energy(h_c - d)).collect();
            let pts = ds.iter().zip(&res).map(|(&x, r)| FitPoint { x, y: r.excess_over_frozen, err: r.excess_over_frozen_error }).collect();
            (h_c, pts, pt_exponent(&res, h_c, window)?)
        }
    };
    let mut t = Table::new("pt_fit.csv", &["distance", "h1", "excess_over_frozen", "error"]);
    for p in &points {
        t.push(row([p.x.into(), (h_c - p.x).into(), p.y.into(), p.err.into()]));
    }
    let mut s = Table::new("pt_fit_summary.csv", &["h_c", "target", "exponent", "stderr", "intercept", "r_squared", "points", "excluded", "flags"]);
    s.push(row([
        h_c.into(),
        1.5.into(),
        fit.exponent.into(),
        fit.stderr.into(),
        fit.intercept.into(),
        fit.r_squared.into(),
        fit.points.into(),
        fit.excluded.len().into(),
        fit.flags.join("; ").into(),
    ]));
    rep.warnings.extend(fit.excluded.iter().map(|x| format!("distance {x} excluded from the fit (not resolved)")));
    rep.tables.push(t);
    rep.tables.push(s);
    Ok(rep)
}

fn gas_fit(cfg: &Config) -> Result<Report> {
    let law = cfg.disorder_law()?;
    let g = &cfg.grid;
    let gamma = match (g.gamma, g.gamma_over_gamma_c, g.alpha) {
        (Some(v), _, _) => v,
        (_, Some(r), _) => r * gamma_c(&law),
        (_, _, Some(a)) => gamma_for_alpha(&law, a)?,
        _ => unreachable!("validated"),
    };
    let (window, n) = fit_window(cfg);
    let mut rep = Report::default();
    rep.seed("curve realization", cfg.seed);
    let gf = gas_transition_exponent(&law, gamma, window, n, &cfg.theta_grid(), &cfg.curve_budget())?;
    let mut t = Table::new("gas_fit.csv", &["distance", "h1", "excess_over_flat", "error"]);
    for p in &gf.points {
        t.push(row([p.x.into(), (gf.flat_edge + p.x).into(), p.y.into(), p.err.into()]));
    }
    let a = &gf.analysis;
    let mut s = Table::new(
        "gas_fit_summary.csv",
        &[
            "gamma",
            "gamma_c",
            "alpha",
            "beta",
            "exponent",
            "stderr",
            "intercept",
            "r_squared",
            "points",
            "excluded",
            "flat_edge",
            "flat_edge_stderr",
            "flat_excess",
            "flat_error",
        ],
    );
    s.push(row([
        a.gamma.into(),
        a.gamma_c.into(),
        a.alpha.into(),
        a.beta.into(),
        gf.fit.exponent.into(),
        gf.fit.stderr.into(),
        gf.fit.intercept.into(),
        gf.fit.r_squared.into(),
        gf.fit.points.into(),
        gf.fit.excluded.len().into(),
        gf.flat_edge.into(),
        gf.flat_edge_stderr.into(),
        gf.flat_excess.into(),
        gf.flat_error.into(),
    ]));
    rep.warnings.extend(gf.fit.excluded.iter().map(|x| format!("distance {x} excluded from the fit (not resolved)")));
    rep.tables.push(t);
    rep.tables.push(s);
    Ok(rep)
}

fn product_budget(cfg: &Config) -> ProductBudget {
    ProductBudget { steps: cfg.budget.steps, blocks: cfg.budget.blocks, seed: cfg.seed }
}

fn dh_bench(cfg: &Config) -> Result<Report> {
    let z = cfg.z_law()?;
    let eps = cfg.grid.eps.clone().unwrap_or_default();
    let mut rep = Report::default();
    rep.seed("Z stream (shared by all eps)", cfg.seed);
    let r = dh_benchmark(&z, &eps, &product_budget(cfg))?;
    let mut t = Table::new("dh_bench.csv", &["eps", "lyapunov", "stderr", "steps"]);
    for (e, l) in &r.points {
        t.push(row([(*e).into(), l.value.into(), l.stderr.into(), l.steps.into()]));
    }
    let mut s = Table::new("dh_bench_summary.csv", &["alpha", "target", "slope", "stderr", "intercept", "r_squared", "points", "excluded"]);
    s.push(row([
        z.alpha()?.into(),
        r.target.into(),
        r.fit.exponent.into(),
        r.fit.stderr.into(),
        r.fit.intercept.into(),
        r.fit.r_squared.into(),
        r.fit.points.into(),
        r.fit.excluded.len().into(),
    ]));
    rep.warnings.extend(r.fit.excluded.iter().map(|x| format!("eps {x} excluded from the fit (not resolved)")));
    rep.tables.push(t);
    rep.tables.push(s);
    Ok(rep)
}

fn essential(cfg: &Config) -> Result<Report> {
    let model = cfg.model()?;
    let mut rep = Report::default();
    seed_for_curves(&mut rep, cfg, "curve realization");
    let p = essential_singularity_probe(&model, &h1_list(cfg), &cfg.theta_grid(), &cfg.curve_budget())?;
    let mut t = Table::new("essential.csv", &["h1", "excess", "error", "probe", "log_ratio", "flagged"]);
    for r in &p.rows {
        t.push(row([r.h1.into(), r.excess.into(), r.error.into(), r.probe.into(), r.log_ratio.into(), r.flagged.into()]));
        if r.flagged {
            rep.warnings.push(format!("H1 = {}: excess not resolved above three errors", r.h1));
        }
    }
    let mut s = Table::new("essential_summary.csv", &["target", "monotone", "final_relative_distance"]);
    let (monotone, rel) = match p.trend() {
        Some((m, r)) => (Cell::B(m), Cell::F(r)),
        None => (Cell::S(String::new()), Cell::F(f64::NAN)),
    };
    s.push(vec![p.target.unwrap_or(f64::NAN).into(), monotone, rel]);
    rep.tables.push(t);
    rep.tables.push(s);
    Ok(rep)
}

fn delta_probe(cfg: &Config) -> Result<Report> {
    let law = cfg.disorder_law()?;
    let mut rep = Report::default();
    rep.seed("layer stream (shared by all H2)", cfg.seed);
    let p = delta_gamma_probe(&law, cfg.gamma(), &cfg.h2_list(), &product_budget(cfg), cfg.experimental)?;
    let mut t = Table::new("delta_probe.csv", &["h2", "delta", "stderr", "difference"]);
    for (h2, e) in &p.rows {
        t.push(row([(*h2).into(), e.value.into(), e.stderr.into(), (e.value - p.at_zero.value).into()]));
    }
    let mut s = Table::new(
        "delta_probe_summary.csv",
        &["label", "gamma", "delta_at_zero", "delta_at_zero_stderr", "exponent", "exponent_stderr", "conjectured_exponent", "prefactor_sign"],
    );
    let (ex, exs) = p.fit.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.exponent, f.stderr));
    s.push(row([
        p.label.into(),
        p.gamma.into(),
        p.at_zero.value.into(),
        p.at_zero.stderr.into(),
        ex.into(),
        exs.into(),
        p.conjectured_exponent.unwrap_or(f64::NAN).into(),
        p.prefactor_sign.into(),
    ]));
    rep.tables.push(t);
    rep.tables.push(s);
    Ok(rep)
}
