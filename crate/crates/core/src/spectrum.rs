//! The spectral curve `𝓛(θ, H2)`, its endpoints `Δ` and `H_c`, and the free
//! energy `F = (1/π) ∫₀^{π/2} max(𝓛, |H1|) dθ`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::disorder::{gamma_modulated_view, sample_layers, DisorderLaw, LayeredSample};
use crate::matprod::{lyapunov_rows, lyapunov_v_rows, make_dimer_matrix, LyapEstimate, LyapMethod};
use crate::numeric::{gauss_legendre, isotonic_regression, Pchip};
use crate::{Error, Result};

/// Source of the layer weights.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveModel {
    Disordered(DisorderLaw),
    /// `w2 ≡ 1`, constant `w1`. Node values are exact spectral radii.
    Pure { w1: f64 },
}

/// Monte Carlo budget for one curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    /// Rows per node before the small-θ boost.
    pub steps: usize,
    pub blocks: usize,
    pub seed: u64,
    /// Cap on the `log²(1/θ)` step multiplier.
    pub boost_cap: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { steps: 1_000_000, blocks: 30, seed: 1, boost_cap: 4.0 }
    }
}

impl Budget {
    pub fn new(steps: usize, seed: u64) -> Self {
        Self { steps, seed, ..Self::default() }
    }

    /// Rows used at angle θ (even, so that γ-periods are complete).
    pub fn steps_at(&self, theta: f64) -> usize {
        let boost = if theta > 0.0 { (1.0 / theta).ln().powi(2) } else { f64::INFINITY };
        let n = (self.steps as f64 * boost.clamp(1.0, self.boost_cap.max(1.0))).round() as usize;
        n + n % 2
    }

    fn max_steps(&self) -> usize {
        self.steps_at(0.0)
    }
}

/// `½ log ρ(M(γ) M(1/γ))` for constant weights `w1`, `w2 = 1`.
pub fn pure_lyapunov(theta: f64, h2: f64, gamma: f64, w1: f64) -> f64 {
    if gamma == 1.0 {
        // roots of λ² − zλ − 1, avoiding the cancellation in tr² − 4 det
        let z = make_dimer_matrix(theta, h2, w1, 1.0).a;
        let disc = (z * z + 4.0).sqrt();
        return ((z + disc) * 0.5).norm().max(((z - disc) * 0.5).norm()).ln();
    }
    let m = make_dimer_matrix(theta, h2, w1, gamma).mul(&make_dimer_matrix(theta, h2, w1, 1.0 / gamma));
    let tr = m.trace();
    let disc = (tr * tr - 4.0 * m.det()).sqrt();
    let rho = ((tr + disc) * 0.5).norm().max(((tr - disc) * 0.5).norm());
    0.5 * rho.ln()
}

/// Nodes from 0 to π/2: geometric near both ends, uniform in between.
pub fn default_theta_grid() -> Vec<f64> {
    theta_grid(1e-8, 3, 24)
}

/// `0`, `per_decade` geometric nodes per decade from `min_theta` to 0.1,
/// `n_uniform` interior nodes, a geometric approach to π/2, and `π/2`.
pub fn theta_grid(min_theta: f64, per_decade: usize, n_uniform: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    let decades = (0.1 / min_theta).log10();
    let n_geo = (decades * per_decade as f64).ceil().max(1.0) as usize;
    for i in 0..n_geo {
        g.push(min_theta * 10f64.powf(decades * i as f64 / n_geo as f64));
    }
    let (a, b) = (0.1, FRAC_PI_2 - 0.1);
    for i in 0..=n_uniform {
        g.push(a + (b - a) * i as f64 / n_uniform as f64);
    }
    for i in (1..3 * per_decade).rev() {
        g.push(FRAC_PI_2 - 1e-3 * 10f64.powf(2.0 * i as f64 / (3 * per_decade) as f64));
    }
    g.push(FRAC_PI_2);
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveNode {
    pub theta: f64,
    pub estimate: LyapEstimate,
    /// Value after isotonic regression.
    pub regressed: f64,
}

/// Node estimates of `𝓛_γ(θ, H2)` and a monotone interpolant in `sin θ`.
#[derive(Debug, Clone)]
pub struct SpectralCurve {
    h2: f64,
    gamma: f64,
    model: CurveModel,
    nodes: Vec<CurveNode>,
    value: Pchip,
    error: Pchip,
}

impl SpectralCurve {
    pub fn h2(&self) -> f64 {
        self.h2
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn model(&self) -> &CurveModel {
        &self.model
    }

    pub fn nodes(&self) -> &[CurveNode] {
        &self.nodes
    }

    /// Interpolated regressed curve.
    pub fn eval(&self, theta: f64) -> f64 {
        self.value.eval(theta.clamp(0.0, FRAC_PI_2).sin())
    }

    /// Interpolated node stderr.
    pub fn stderr(&self, theta: f64) -> f64 {
        self.error.eval(theta.clamp(0.0, FRAC_PI_2).sin()).max(0.0)
    }

    /// `Δ = 𝓛(0)`.
    pub fn delta(&self) -> f64 {
        self.nodes[0].regressed
    }

    /// `H_c = 𝓛(π/2)`.
    pub fn h_c(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].regressed
    }

    /// Largest regression adjustment in units of the node stderr.
    pub fn max_adjustment_sigmas(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| {
                let d = (n.regressed - n.estimate.value).abs();
                if d <= 4.0 * f64::EPSILON * n.estimate.value.abs().max(f64::MIN_POSITIVE) {
                    0.0
                } else if n.estimate.stderr > 0.0 {
                    d / n.estimate.stderr
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

fn realization(law: &DisorderLaw, gamma: f64, budget: &Budget) -> Result<LayeredSample> {
    let rows = sample_layers(law, 0..budget.max_steps() as i64, budget.seed)?;
    if gamma > 1.0 {
        gamma_modulated_view(&rows, gamma)
    } else {
        Ok(rows)
    }
}

fn exact(value: f64) -> LyapEstimate {
    LyapEstimate { value, stderr: 0.0, steps: 0, method: LyapMethod::Norm }
}

fn node_estimate(theta: f64, h2: f64, gamma: f64, model: &CurveModel, rows: Option<&LayeredSample>, budget: &Budget) -> Result<LyapEstimate> {
    let rows = match (model, rows) {
        (CurveModel::Pure { w1 }, _) => return Ok(exact(pure_lyapunov(theta, h2, gamma, *w1))),
        (CurveModel::Disordered(_), Some(r)) => r,
        (CurveModel::Disordered(_), None) => return Err(Error::Precondition("disordered nodes need a realization".into())),
    };
    let n = budget.steps_at(theta).min(rows.len());
    let rows = &rows.rows()[..n];
    if theta == 0.0 {
        if gamma == 1.0 {
            if h2 == 0.0 {
                return Ok(exact(0.0));
            }
            return lyapunov_v_rows(rows, 2.0 * h2.sinh(), budget.blocks);
        }
        return lyapunov_rows(rows, 0.0, h2, budget.blocks, LyapMethod::Norm);
    }
    match lyapunov_rows(rows, theta, h2, budget.blocks, LyapMethod::Trace) {
        Err(Error::DegenerateAngle) => lyapunov_rows(rows, theta, h2, budget.blocks, LyapMethod::Norm),
        r => r,
    }
}

/// Estimates `𝓛_γ(θ, H2)` at every grid node on one shared realization,
/// then projects the node values onto non-decreasing sequences.
pub fn build_spectral_curve(h2: f64, gamma: f64, model: &CurveModel, theta_grid: &[f64], budget: &Budget) -> Result<SpectralCurve> {
    let h2 = h2.abs();
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::Precondition(format!("gamma must be >= 1, got {gamma}")));
    }
    if theta_grid.len() < 2 || theta_grid[0] != 0.0 || *theta_grid.last().unwrap() != FRAC_PI_2 {
        return Err(Error::Precondition("θ grid must run from 0 to π/2".into()));
    }
    if theta_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("θ grid must be strictly increasing".into()));
    }
    if let CurveModel::Pure { w1 } = model {
        if !(*w1 > 0.0) {
            return Err(Error::Precondition("w1 must be positive".into()));
        }
    }
    let rows = match model {
        CurveModel::Disordered(law) => Some(realization(law, gamma, budget)?),
        CurveModel::Pure { .. } => None,
    };
    let estimates: Vec<LyapEstimate> =
        theta_grid.par_iter().map(|&t| node_estimate(t, h2, gamma, model, rows.as_ref(), budget)).collect::<Result<_>>()?;
    let raw: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let weights: Vec<f64> = estimates.iter().map(|e| 1.0 / e.stderr.max(1e-12).powi(2)).collect();
    let regressed = isotonic_regression(&raw, &weights);
    let s: Vec<f64> = theta_grid.iter().map(|t| t.sin()).collect();
    let value = Pchip::new(s.clone(), regressed.clone())?;
    let error = Pchip::new(s, estimates.iter().map(|e| e.stderr).collect())?;
    let nodes = theta_grid.iter().zip(estimates).zip(regressed).map(|((&theta, estimate), regressed)| CurveNode { theta, estimate, regressed }).collect();
    Ok(SpectralCurve { h2, gamma, model: model.clone(), nodes, value, error })
}

/// `Δ(H2)` from the real matrices `V^{2 sinh H2}`; exactly 0 at `H2 = 0`.
pub fn delta(h2: f64, law: &DisorderLaw, budget: &Budget) -> Result<LyapEstimate> {
    if h2 == 0.0 {
        return Ok(exact(0.0));
    }
    let rows = sample_layers(law, 0..budget.steps as i64, budget.seed)?;
    lyapunov_v_rows(rows.rows(), 2.0 * h2.abs().sinh(), budget.blocks)
}

/// `H_c = 𝓛_γ(π/2, H2)`.
pub fn h_c(h2: f64, gamma: f64, model: &CurveModel, budget: &Budget) -> Result<LyapEstimate> {
    let rows = match model {
        CurveModel::Disordered(law) => Some(realization(law, gamma, &Budget { boost_cap: 1.0, ..*budget })?),
        CurveModel::Pure { .. } => None,
    };
    node_estimate(FRAC_PI_2, h2.abs(), gamma, model, rows.as_ref(), budget)
}

/// Where the level `h` meets the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inversion {
    /// `h ≤ Δ`: `θ_c = 0`.
    Below,
    Interior(f64),
    /// `h ≥ H_c`: `θ_c = π/2`.
    Above,
}

impl Inversion {
    pub fn theta(&self) -> f64 {
        match *self {
            Inversion::Below => 0.0,
            Inversion::Interior(t) => t,
            Inversion::Above => FRAC_PI_2,
        }
    }
}

/// Smallest θ with `𝓛(θ) ≥ h` on the regressed interpolant, by bisection.
pub fn invert_curve(curve: &SpectralCurve, h: f64) -> Inversion {
    if h <= curve.delta() {
        return Inversion::Below;
    }
    if h >= curve.h_c() {
        return Inversion::Above;
    }
    let (mut lo, mut hi) = (0.0f64, FRAC_PI_2);
    while hi - lo > 1e-15 * hi.max(1e-300) && hi - lo > 1e-300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if curve.eval(mid) >= h {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Inversion::Interior(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// `|H1| ≤ Δ`: the flat region (gaseous when `γ > 1`).
    FlatC,
    Liquid,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub h1: f64,
    pub h2: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEnergyResult {
    pub h1: f64,
    pub value: f64,
    pub quadrature_error: f64,
    pub mc_error: f64,
    pub phase_label: Phase,
    pub theta_c: f64,
    /// `F(H1) − F(0) = (1/π) ∫_{𝓛<H1} (H1 − 𝓛)`.
    pub excess_over_flat: f64,
    pub excess_over_flat_error: f64,
    /// `F(H1) − H1/2 = (1/π) ∫_{𝓛>H1} (𝓛 − H1)`.
    pub excess_over_frozen: f64,
    pub excess_over_frozen_error: f64,
}

impl FreeEnergyResult {
    pub fn error(&self) -> f64 {
        self.quadrature_error + self.mc_error
    }
}

/// `∫_a^b f` over the node panels of `curve`, 16-point Gauss–Legendre per
/// panel, with `|GL16 − GL8|` as the error estimate.
fn panel_integral(curve: &SpectralCurve, a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    if b <= a {
        return (0.0, 0.0);
    }
    let mut cuts = vec![a];
    cuts.extend(curve.nodes.iter().map(|n| n.theta).filter(|&t| t > a && t < b));
    cuts.push(b);
    let (mut total, mut err) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let hi = gauss_legendre(16, w[0], w[1], f);
        let lo = gauss_legendre(8, w[0], w[1], f);
        total += hi;
        err += (hi - lo).abs();
    }
    (total, err)
}

impl SpectralCurve {
    /// Free energy at `|H1|` from this curve.
    pub fn free_energy(&self, h1: f64) -> FreeEnergyResult {
        let h1 = h1.abs();
        let inv = invert_curve(self, h1);
        let tc = inv.theta();
        let phase_label = match inv {
            Inversion::Below => Phase::FlatC,
            Inversion::Interior(_) => Phase::Liquid,
            Inversion::Above => Phase::Frozen,
        };
        let (upper, q_upper) = panel_integral(self, tc, FRAC_PI_2, &|t| self.eval(t) - h1);
        let (lower, q_lower) = panel_integral(self, 0.0, tc, &|t| h1 - self.eval(t));
        let (se_upper, _) = panel_integral(self, tc, FRAC_PI_2, &|t| self.stderr(t));
        let (se_lower, _) = panel_integral(self, 0.0, tc, &|t| self.stderr(t));
        let excess_over_frozen = upper.max(0.0) / PI;
        let value = if phase_label == Phase::Frozen { 0.5 * h1 } else { 0.5 * h1 + excess_over_frozen };
        FreeEnergyResult {
            h1,
            value,
            quadrature_error: q_upper / PI,
            mc_error: se_upper / PI,
            phase_label,
            theta_c: tc,
            excess_over_flat: lower.max(0.0) / PI,
            excess_over_flat_error: (q_lower + se_lower) / PI,
            excess_over_frozen,
            excess_over_frozen_error: (q_upper + se_upper) / PI,
        }
    }
}

/// `F(H1, H2)` (or `F_γ`) at one point, building its own curve.
pub fn free_energy(point: PhasePoint, model: &CurveModel, theta_grid: &[f64], budget: &Budget) -> Result<FreeEnergyResult> {
    Ok(build_spectral_curve(point.h2, point.gamma, model, theta_grid, budget)?.free_energy(point.h1))
}

/// `F` along `h1_grid` from one shared curve.
pub fn free_energy_curve(h1_grid: &[f64], h2: f64, gamma: f64, model: &CurveModel, theta_grid: &[f64], budget: &Budget) -> Result<(SpectralCurve, Vec<FreeEnergyResult>)> {
    let curve = build_spectral_curve(h2, gamma, model, theta_grid, budget)?;
    let out = h1_grid.iter().map(|&h| curve.free_energy(h)).collect();
    Ok((curve, out))
}

/// `(1/4) ⟨log|P(z1, z2)|⟩` over `|z_i| = e^{2H_i}` for the pure model, where
/// `P = z1 + 1/z1 + w1²(z2 + 1/z2) + γ² + 1/γ² + 2w1²`, by tensor
/// Gauss–Legendre with `n` panels per angle.
pub fn pure_free_energy_integral(h1: f64, h2: f64, gamma: f64, w1: f64, n: usize) -> f64 {
    let r1 = (2.0 * h1).exp();
    let r2 = (2.0 * h2).exp();
    let c = gamma * gamma + 1.0 / (gamma * gamma) + 2.0 * w1 * w1;
    let p = |a: f64, b: f64| {
        let z1 = Complex64::from_polar(r1, a);
        let z2 = Complex64::from_polar(r2, b);
        (z1 + 1.0 / z1 + (z2 + 1.0 / z2) * (w1 * w1) + c).norm().ln()
    };
    let panel = 2.0 * PI / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let (a0, a1) = (i as f64 * panel, (i + 1) as f64 * panel);
        total += gauss_legendre(16, a0, a1, |a| {
            (0..n).map(|j| gauss_legendre(16, j as f64 * panel, (j + 1) as f64 * panel, |b| p(a, b))).sum::<f64>()
        });
    }
    0.25 * total / (4.0 * PI * PI)
}
