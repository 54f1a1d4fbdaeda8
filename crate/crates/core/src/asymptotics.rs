//! Exponent solvers and regression harnesses for the singular behavior of
//! the free energy, the Lyapunov curve and the correlations.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::disorder::{gamma_modulated_view, sample_layers, DisorderLaw};
use crate::matprod::{lyapunov, lyapunov_rows, LyapEstimate, LyapMethod, Mat2};
use crate::numeric::{adaptive_gl, bisect, linear_fit};
use crate::spectrum::{self, build_spectral_curve, Budget, CurveModel, FreeEnergyResult};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r_squared: f64,
    /// Abscissa range actually used.
    pub window: (f64, f64),
    pub points: usize,
    /// Abscissae dropped because the ordinate was not resolved above noise.
    pub excluded: Vec<f64>,
    pub flags: Vec<String>,
}

/// One datum for a fit: ordinate `y ± err` at abscissa `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    pub x: f64,
    pub y: f64,
    pub err: f64,
}

/// Power law `y ≈ C x^p` by least squares on `(log x, log y)`, over the
/// points with `x` in `window` (all points if `None`).
pub fn fit_power_law(points: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<ExponentFit> {
    let pts: Vec<FitPoint> = points.iter().map(|&(x, y)| FitPoint { x, y, err: 0.0 }).collect();
    fit_points(&pts, window, 0.0)
}

/// Like [`fit_power_law`], excluding points with `y ≤ sigmas · err`.
pub fn fit_points(points: &[FitPoint], window: Option<(f64, f64)>, sigmas: f64) -> Result<ExponentFit> {
    let inside = |x: f64| window.is_none_or(|(lo, hi)| x >= lo && x <= hi);
    let mut excluded = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in points.iter().filter(|p| inside(p.x)) {
        if !(p.x > 0.0) {
            return Err(Error::Fit(format!("nonpositive abscissa {}", p.x)));
        }
        if sigmas > 0.0 && p.y <= sigmas * p.err {
            excluded.push(p.x);
            continue;
        }
        if !(p.y > 0.0) {
            return Err(Error::Fit(format!("nonpositive value {} at x = {}", p.y, p.x)));
        }
        xs.push(p.x.ln());
        ys.push(p.y.ln());
    }
    let fit = linear_fit(&xs, &ys)?;
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min).exp();
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    let mut flags = Vec::new();
    if !excluded.is_empty() {
        flags.push(format!("{} points below {sigmas} sigma excluded", excluded.len()));
    }
    Ok(ExponentFit { exponent: fit.slope, intercept: fit.intercept, stderr: fit.slope_stderr, r_squared: fit.r_squared, window: (lo, hi), points: xs.len(), excluded, flags })
}

/// Regression of `−log|cov|` on `√y`; the slope is the stretched rate.
/// Flagged when `r² < 0.9`.
pub fn fit_stretched(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0) || !(p.0 >= 0.0)) {
        return Err(Error::Fit(format!("nonpositive magnitude {} at y = {}", p.1, p.0)));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.sqrt()).collect();
    let y: Vec<f64> = points.iter().map(|p| -p.1.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let mut flags = Vec::new();
    if fit.r_squared < 0.9 {
        flags.push(format!("poor stretched-exponential fit, r² = {:.3}", fit.r_squared));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(ExponentFit { exponent: fit.slope, intercept: fit.intercept, stderr: fit.slope_stderr, r_squared: fit.r_squared, window: (lo, hi), points: points.len(), excluded: Vec::new(), flags })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaAnalysis {
    pub gamma: f64,
    /// `+∞` when no positive root exists.
    pub alpha: f64,
    pub beta: f64,
    pub gamma_c: f64,
}

fn log_moment_product(law: &DisorderLaw, a: f64) -> f64 {
    law.log_moment_w2(2.0 * a) + law.log_moment_w2(-2.0 * a)
}

/// `γ_c = (E w2² · E w2⁻²)^{1/4}`.
pub fn gamma_c(law: &DisorderLaw) -> f64 {
    (0.25 * log_moment_product(law, 1.0)).exp()
}

/// The `γ` at which `α(γ)` equals `alpha`.
pub fn gamma_for_alpha(law: &DisorderLaw, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Precondition(format!("alpha must be positive and finite, got {alpha}")));
    }
    Ok((log_moment_product(law, alpha) / (4.0 * alpha)).exp())
}

/// Positive root of `4α log γ = log(E w2^{2α} · E w2^{−2α})`, or `+∞` if the
/// left side still dominates at `α = 50 / Var(log w2)`.
pub fn alpha_gamma(law: &DisorderLaw, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::Precondition(format!("need γ > 1, got {gamma}")));
    }
    let lg = gamma.ln();
    let g = |a: f64| 4.0 * a * lg - log_moment_product(law, a);
    let cap = 50.0 / law.log_variance();
    let mut lo = 0.0;
    let mut hi = 1.0f64.min(cap);
    while g(hi) > 0.0 {
        if hi >= cap {
            return Ok(f64::INFINITY);
        }
        lo = hi;
        hi = (2.0 * hi).min(cap);
    }
    if lo == 0.0 {
        lo = hi;
        while g(lo) <= 0.0 {
            lo *= 0.5;
        }
    }
    bisect(g, lo, hi, 1e-15 * hi)
}

/// `max(1 + 1/(2α), 3/2)`.
pub fn beta_from_alpha(alpha: f64) -> f64 {
    if alpha.is_infinite() {
        1.5
    } else {
        (1.0 + 0.5 / alpha).max(1.5)
    }
}

pub fn beta_gamma(law: &DisorderLaw, gamma: f64) -> Result<f64> {
    Ok(beta_from_alpha(alpha_gamma(law, gamma)?))
}

pub fn gamma_analysis(law: &DisorderLaw, gamma: f64) -> Result<GammaAnalysis> {
    let alpha = alpha_gamma(law, gamma)?;
    Ok(GammaAnalysis { gamma, alpha, beta: beta_from_alpha(alpha), gamma_c: gamma_c(law) })
}

/// Law of `Z` in the matrices `[[1, ε], [εZ, Z]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZLaw {
    /// `log Z` uniform on `[lo, hi]`.
    LogUniform { lo: f64, hi: f64 },
    /// `Z = a` with probability `p`, else `b`.
    TwoPoint { a: f64, b: f64, p: f64 },
}

impl ZLaw {
    pub fn mean_log(&self) -> f64 {
        match *self {
            ZLaw::LogUniform { lo, hi } => 0.5 * (lo + hi),
            ZLaw::TwoPoint { a, b, p } => p * a.ln() + (1.0 - p) * b.ln(),
        }
    }

    /// `log E Z^q`.
    pub fn log_moment(&self, q: f64) -> f64 {
        match *self {
            ZLaw::LogUniform { lo, hi } => {
                let x = q * (hi - lo);
                if x.abs() < 1e-8 {
                    q * 0.5 * (lo + hi)
                } else if x > 0.0 {
                    q * hi + (-(-x).exp_m1() / x).ln()
                } else {
                    q * lo + (x.exp_m1() / x).ln()
                }
            }
            ZLaw::TwoPoint { a, b, p } => {
                let (u, v) = (p.ln() + q * a.ln(), (1.0 - p).ln() + q * b.ln());
                let m = u.max(v);
                m + ((u - m).exp() + (v - m).exp()).ln()
            }
        }
    }

    fn max_log(&self) -> f64 {
        match *self {
            ZLaw::LogUniform { hi, .. } => hi,
            ZLaw::TwoPoint { a, b, .. } => a.ln().max(b.ln()),
        }
    }

    /// Positive root of `E Z^α = 1`; `+∞` when `Z ≤ 1` almost surely.
    pub fn alpha(&self) -> Result<f64> {
        if !(self.mean_log() < 0.0) {
            return Err(Error::Precondition("need E log Z < 0".into()));
        }
        if self.max_log() <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let f = |a: f64| self.log_moment(a);
        let mut hi = 1.0;
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        let mut lo = hi;
        while f(lo) >= 0.0 {
            lo *= 0.5;
        }
        bisect(f, lo, hi, 1e-15 * hi)
    }

    /// Log-uniform law on `[lo, hi]` with `hi` tuned so that `E Z^α = 1`.
    pub fn log_uniform_with_alpha(lo: f64, alpha: f64) -> Result<Self> {
        if !(lo < 0.0) || !(alpha > 0.0) {
            return Err(Error::Precondition("need lo < 0 and α > 0".into()));
        }
        // E log Z < 0 forces hi < −lo; E Z^α < 1 at hi = 0 and > 1 at hi = −lo
        let hi = bisect(|h| ZLaw::LogUniform { lo, hi: h }.log_moment(alpha), 0.0, -lo, 1e-15)?;
        Ok(ZLaw::LogUniform { lo, hi })
    }

    fn draw(&self, u: f64) -> f64 {
        match *self {
            ZLaw::LogUniform { lo, hi } => (lo + u * (hi - lo)).exp(),
            ZLaw::TwoPoint { a, b, p } => {
                if u < p {
                    a
                } else {
                    b
                }
            }
        }
    }
}

/// Monte Carlo budget for matrix-product experiments outside the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductBudget {
    pub steps: usize,
    pub blocks: usize,
    pub seed: u64,
}

impl Default for ProductBudget {
    fn default() -> Self {
        Self { steps: 4_000_000, blocks: 40, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DhResult {
    pub points: Vec<(f64, LyapEstimate)>,
    pub fit: ExponentFit,
    /// `2 · min(α, 1)`.
    pub target: f64,
}

/// Lyapunov exponent of `[[1, ε], [εZ, Z]]` along `eps_grid`, all on the same
/// `Z` stream, and the log-log slope in `ε`.
pub fn dh_benchmark(z: &ZLaw, eps_grid: &[f64], budget: &ProductBudget) -> Result<DhResult> {
    let alpha = z.alpha()?;
    if eps_grid.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::Precondition("ε must be nonnegative".into()));
    }
    let points: Vec<(f64, LyapEstimate)> = eps_grid
        .par_iter()
        .map(|&eps| {
            let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
            let stream = std::iter::repeat_with(move || {
                let zv = z.draw(rng.random::<f64>());
                Mat2::new(1.0, eps, eps * zv, zv)
            });
            Ok((eps, lyapunov(stream, budget.steps, budget.blocks, LyapMethod::Norm)?))
        })
        .collect::<Result<_>>()?;
    let fp: Vec<FitPoint> = points.iter().filter(|p| p.0 > 0.0).map(|(e, l)| FitPoint { x: *e, y: l.value, err: l.stderr }).collect();
    let fit = fit_points(&fp, None, 3.0)?;
    Ok(DhResult { points, fit, target: 2.0 * alpha.min(1.0) })
}

/// `F(H1) − H1/2` against `H_c − H1` for the free-energy results whose
/// distance to `h_c` lies in `window`.
pub fn pt_exponent(results: &[FreeEnergyResult], h_c: f64, window: (f64, f64)) -> Result<ExponentFit> {
    let pts: Vec<FitPoint> = results
        .iter()
        .filter(|r| r.h1 < h_c)
        .map(|r| FitPoint { x: h_c - r.h1, y: r.excess_over_frozen, err: r.excess_over_frozen_error })
        .collect();
    let mut fit = fit_points(&pts, Some(window), 3.0)?;
    if !fit.excluded.is_empty() {
        fit.flags.push("window reaches the noise floor near H_c".into());
    }
    Ok(fit)
}

/// `H1` values at `H_c − d` for `d` geometric on `window`.
pub fn geometric_grid(window: (f64, f64), n: usize) -> Vec<f64> {
    let (a, b) = (window.0.ln(), window.1.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasFit {
    /// `(H1 − Δ_γ(0), F_γ(H1) − F_γ(0), error)`.
    pub points: Vec<FitPoint>,
    pub fit: ExponentFit,
    pub analysis: GammaAnalysis,
    /// `Δ_γ(0)` as read from the curve.
    pub flat_edge: f64,
    pub flat_edge_stderr: f64,
    /// Largest `F_γ(H1) − F_γ(0)` over `H1 ∈ [0, Δ_γ(0)]`, and its error.
    pub flat_excess: f64,
    pub flat_error: f64,
}

/// `F_γ(H1) − F_γ(0)` against `H1 − Δ_γ(0)` on a geometric window, compared
/// with `β(γ)`.
pub fn gas_transition_exponent(law: &DisorderLaw, gamma: f64, window: (f64, f64), n_points: usize, theta_grid: &[f64], budget: &Budget) -> Result<GasFit> {
    let analysis = gamma_analysis(law, gamma)?;
    let curve = build_spectral_curve(0.0, gamma, &CurveModel::Disordered(law.clone()), theta_grid, budget)?;
    let edge = curve.delta();
    let edge_se = curve.nodes()[0].estimate.stderr;
    let pts: Vec<FitPoint> = geometric_grid(window, n_points)
        .into_iter()
        .map(|e| {
            let f = curve.free_energy(edge + e);
            FitPoint { x: e, y: f.excess_over_flat, err: f.excess_over_flat_error }
        })
        .collect();
    let fit = fit_points(&pts, None, 3.0)?;
    let flat: Vec<FreeEnergyResult> = (0..=8).map(|i| curve.free_energy(edge * i as f64 / 8.0)).collect();
    let flat_excess = flat.iter().map(|f| f.excess_over_flat).fold(0.0, f64::max);
    let flat_error = flat.iter().map(|f| f.excess_over_flat_error).fold(0.0, f64::max);
    Ok(GasFit { points: pts, fit, analysis, flat_edge: edge, flat_edge_stderr: edge_se, flat_excess, flat_error })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub h1: f64,
    /// `F(H1) − F(0)`.
    pub excess: f64,
    pub error: f64,
    /// `−H1 · log(F(H1) − F(0))`.
    pub probe: f64,
    /// `log(F(H1) − F(0)) / log H1`: 2 for a quadratic onset, unbounded for
    /// an essential singularity.
    pub log_ratio: f64,
    /// Excess not resolved above three errors; kept out of the trend.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssentialProbe {
    pub rows: Vec<ProbeRow>,
    /// `Var(log w2)` for disordered models.
    pub target: Option<f64>,
}

impl EssentialProbe {
    /// Whether `|probe − target|` shrinks monotonically as `H1` decreases
    /// over the unflagged rows, and the final relative distance to the target.
    pub fn trend(&self) -> Option<(bool, f64)> {
        let t = self.target?;
        let mut rows: Vec<&ProbeRow> = self.rows.iter().filter(|r| !r.flagged).collect();
        rows.sort_by(|a, b| b.h1.total_cmp(&a.h1));
        let last = rows.last()?;
        let monotone = rows.windows(2).all(|w| (w[1].probe - t).abs() <= (w[0].probe - t).abs());
        Some((monotone, (last.probe - t).abs() / t))
    }
}

/// `−H1 log(F(H1) − F(0))` at `H2 = 0`, `γ = 1` along `h1_grid ⊂ (0, H_c/2]`.
pub fn essential_singularity_probe(model: &CurveModel, h1_grid: &[f64], theta_grid: &[f64], budget: &Budget) -> Result<EssentialProbe> {
    let curve = build_spectral_curve(0.0, 1.0, model, theta_grid, budget)?;
    let hc = curve.h_c();
    if let Some(h) = h1_grid.iter().find(|h| !(**h > 0.0 && **h <= 0.5 * hc)) {
        return Err(Error::Precondition(format!("H1 = {h} outside (0, H_c/2] with H_c = {hc}")));
    }
    let rows = h1_grid
        .iter()
        .map(|&h1| {
            let f = curve.free_energy(h1);
            let (excess, error) = (f.excess_over_flat, f.excess_over_flat_error);
            ProbeRow { h1, excess, error, probe: -h1 * excess.ln(), log_ratio: excess.ln() / h1.ln(), flagged: excess <= 3.0 * error }
        })
        .collect();
    let target = match model {
        CurveModel::Disordered(law) => Some(law.log_variance()),
        CurveModel::Pure { .. } => None,
    };
    Ok(EssentialProbe { rows, target })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaGammaProbe {
    pub gamma: f64,
    /// `(H2, Δ_γ(H2))`.
    pub rows: Vec<(f64, LyapEstimate)>,
    /// `Δ_γ(0)`, estimated on the same stream.
    pub at_zero: LyapEstimate,
    /// Fit of `|Δ_γ(H2) − Δ_γ(0)|` against `|H2|`, when enough points resolve.
    pub fit: Option<ExponentFit>,
    /// `2 · min(α(γ), 1)`; `None` at `γ = 1`.
    pub conjectured_exponent: Option<f64>,
    /// Sign of `Δ_γ(H2) − Δ_γ(0)` over the resolved points (0 if mixed).
    pub prefactor_sign: f64,
    pub label: &'static str,
}

/// `Δ_γ(H2) = 𝓛_γ(0, H2)` over `h2_grid`. Conjectural; refuses to run unless
/// `experimental` is set.
pub fn delta_gamma_probe(law: &DisorderLaw, gamma: f64, h2_grid: &[f64], budget: &ProductBudget, experimental: bool) -> Result<DeltaGammaProbe> {
    if !experimental {
        return Err(Error::Precondition("delta-gamma probe is a conjecture probe; set the experimental flag".into()));
    }
    if !(gamma >= 1.0) {
        return Err(Error::Precondition(format!("need γ >= 1, got {gamma}")));
    }
    let rows = sample_layers(law, 0..budget.steps as i64, budget.seed)?;
    let rows = if gamma > 1.0 { gamma_modulated_view(&rows, gamma)? } else { rows };
    let curve_budget = Budget { steps: budget.steps, blocks: budget.blocks, seed: budget.seed, boost_cap: 1.0 };
    let eval = |h2: f64| -> Result<LyapEstimate> {
        if gamma == 1.0 {
            spectrum::delta(h2, law, &curve_budget)
        } else {
            lyapunov_rows(rows.rows(), 0.0, h2.abs(), budget.blocks, LyapMethod::Norm)
        }
    };
    let at_zero = eval(0.0)?;
    let out: Vec<(f64, LyapEstimate)> = h2_grid.par_iter().map(|&h| Ok((h, eval(h)?))).collect::<Result<_>>()?;
    let resolved: Vec<(f64, f64, f64)> = out
        .iter()
        .filter(|(h, _)| *h != 0.0)
        .map(|(h, e)| (h.abs(), e.value - at_zero.value, e.stderr + at_zero.stderr))
        .filter(|(_, d, s)| d.abs() > 3.0 * s)
        .collect();
    let prefactor_sign = match resolved.iter().map(|r| r.1.signum()).sum::<f64>() {
        s if s == resolved.len() as f64 && s > 0.0 => 1.0,
        s if s == -(resolved.len() as f64) && s < 0.0 => -1.0,
        _ => 0.0,
    };
    let fit = if resolved.len() >= 2 { fit_power_law(&resolved.iter().map(|r| (r.0, r.1.abs())).collect::<Vec<_>>(), None).ok() } else { None };
    let conjectured_exponent = if gamma > 1.0 { Some(2.0 * alpha_gamma(law, gamma)?.min(1.0)) } else { None };
    Ok(DeltaGammaProbe { gamma, rows: out, at_zero, fit, conjectured_exponent, prefactor_sign, label: "conjecture-probe" })
}

/// Closed forms of the constant-weight model (`w2 ≡ 1`).
pub mod pure {
    use super::*;

    /// `𝓛(θ) = log(w1 sin θ + √(1 + w1² sin² θ))` at `H2 = 0`, `γ = 1`.
    pub fn lyapunov(theta: f64, w1: f64) -> f64 {
        (w1 * theta.sin()).asinh()
    }

    /// `H_c = 𝓛(π/2) = asinh(w1)`.
    pub fn h_c(w1: f64) -> f64 {
        w1.asinh()
    }

    /// Limit of `(𝓛(π/2) − 𝓛(θ)) / (θ − π/2)²`.
    pub fn endpoint_curvature(w1: f64) -> f64 {
        w1 / (2.0 * (1.0 + w1 * w1).sqrt())
    }

    /// `θ_c(H1) = asin(sinh H1 / w1)`, clamped to `[0, π/2]`.
    pub fn theta_c(h1: f64, w1: f64) -> f64 {
        let s = h1.abs().sinh() / w1;
        if s >= 1.0 {
            FRAC_PI_2
        } else {
            s.asin()
        }
    }

    fn integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        if b <= a {
            return (0.0, 0.0);
        }
        let mut g = |t: f64| Ok(f(t));
        match adaptive_gl(&mut g, a, b, 1e-15, 1e-13, 30) {
            Ok(q) => (q.value, q.error),
            Err(_) => (f64::NAN, f64::INFINITY),
        }
    }

    /// `F(H1) − H1/2 = (1/π) ∫_{θ_c}^{π/2} (𝓛 − H1)` with its quadrature error.
    pub fn excess_over_frozen(h1: f64, w1: f64) -> (f64, f64) {
        let h = h1.abs();
        let (v, e) = integral(|t| lyapunov(t, w1) - h, theta_c(h, w1), FRAC_PI_2);
        (v / PI, e / PI)
    }

    /// `F(H1) − F(0) = (1/π) ∫_0^{θ_c} (H1 − 𝓛)` with its quadrature error.
    pub fn excess_over_flat(h1: f64, w1: f64) -> (f64, f64) {
        let h = h1.abs();
        let (v, e) = integral(|t| h - lyapunov(t, w1), 0.0, theta_c(h, w1));
        (v / PI, e / PI)
    }

    /// Pokrovsky–Talapov data `(H_c − H1, F − H1/2, error)` at the distances `d`.
    pub fn pt_points(w1: f64, d: &[f64]) -> Vec<FitPoint> {
        d.iter()
            .map(|&x| {
                let (y, err) = excess_over_frozen(h_c(w1) - x, w1);
                FitPoint { x, y, err }
            })
            .collect()
    }

    /// `¼ ⟨log|P|⟩` over the torus `|z_i| = e^{2H_i}`, with `n` and `2n`
    /// panels per angle; returns the finer value and the difference.
    pub fn free_energy_torus(h1: f64, h2: f64, gamma: f64, w1: f64, n: usize) -> (f64, f64) {
        let coarse = spectrum::pure_free_energy_integral(h1, h2, gamma, w1, n);
        let fine = spectrum::pure_free_energy_integral(h1, h2, gamma, w1, 2 * n);
        (fine, (fine - coarse).abs())
    }
}
