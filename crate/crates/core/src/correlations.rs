//! Infinite-volume covariance of two horizontal dimers at `H2 = 0`, from
//! boundary vectors of the one-sided products `M^θ_y`.
//!
//! Geometry: `e = {(x, y), (x+1, y)}` with its black vertex on the left and
//! `e′ = {(0, 0), (1, 0)}` with its black vertex on the right, `y > 0`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::disorder::{sample_layers, DisorderLaw, LayeredSample, Row};
use crate::kasteleyn::Edge;
use crate::matprod::{boundary_vector, Direction, Mat2r, ProductAccumulator};
use crate::numeric::{adaptive_gl, gauss_legendre};
use crate::spectrum::{invert_curve, Inversion, SpectralCurve};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgePair {
    x: i64,
    y: i64,
}

impl EdgePair {
    /// Requires `y > 0` and `x + y` odd (black vertex of `e` on the left).
    pub fn new(x: i64, y: i64) -> Result<Self> {
        if y <= 0 {
            return Err(Error::InvalidPair(format!("need y > 0, got {y}")));
        }
        if (x + y).rem_euclid(2) != 1 {
            return Err(Error::InvalidPair(format!("(x, y) = ({x}, {y}) puts a white vertex on the left")));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> i64 {
        self.x
    }

    pub fn y(&self) -> i64 {
        self.y
    }

    /// `(e, e′)` as torus edges.
    pub fn edges(&self) -> (Edge, Edge) {
        (Edge::horizontal(self.x, self.y).expect("x + y odd"), Edge::horizontal(0, 0).expect("origin edge"))
    }

    fn phase(&self, theta: f64) -> f64 {
        (self.x as f64 * theta - FRAC_PI_2 * self.x.rem_euclid(4) as f64).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub max_depth: u32,
    /// Hyperbolic-diameter tolerance for boundary vectors.
    pub vec_tol: f64,
    /// Layers available to each boundary vector on either side.
    pub max_layers: usize,
    /// Accept the small-θ tail once `θ |f(θ)|` is below `tail_tol · |I|`.
    pub tail_tol: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-8, max_depth: 40, vec_tol: 1e-10, max_layers: 10_000, tail_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovResult {
    pub value: f64,
    pub quad_error: f64,
    pub vec_tol: f64,
    /// Bound on the effect of `vec_tol` on `value`.
    pub vec_error: f64,
    /// Effect of the uncertainty in `θ_c` (liquid phase only).
    pub curve_error: f64,
    pub seed: u64,
    pub layers_used: usize,
}

impl CovResult {
    pub fn sign(&self) -> f64 {
        self.value.signum()
    }

    pub fn error(&self) -> f64 {
        self.quad_error + self.vec_error + self.curve_error
    }
}

/// The θ-dependent pieces shared by the three integrands.
struct Kernel<'a> {
    layers: &'a LayeredSample,
    pair: EdgePair,
    tol: f64,
    pure: Option<Row>,
}

struct Boundary {
    /// `⟨e1, V<0⟩⟨V>y, e1⟩ / ⟨M_0 ⋯ M_y V>y, V<0⟩ · e^{Σ_{r<y} log w2(r)}`
    ratio: f64,
    layers: usize,
}

impl<'a> Kernel<'a> {
    fn new(layers: &'a LayeredSample, pair: EdgePair, tol: f64) -> Result<Self> {
        let y = pair.y;
        if !layers.contains(-1) || !layers.contains(y + 1) {
            return Err(Error::RowOutOfRange { y: -1, lo: layers.start(), hi: layers.end() });
        }
        let rows = layers.rows();
        let pure = rows.iter().all(|r| *r == rows[0]).then_some(rows[0]);
        Ok(Self { layers, pair, tol, pure })
    }

    fn matrix(&self, theta: f64, y: i64) -> Result<Mat2r> {
        let r = self.layers.get(y)?;
        Ok(Mat2r::new(2.0 * r.w1 * theta.sin(), r.w2 * r.w2, 1.0, 0.0))
    }

    fn vectors(&self, theta: f64) -> Result<([f64; 2], [f64; 2], usize)> {
        if let Some(r) = self.pure {
            let s = 2.0 * r.w1 * theta.sin();
            let w = r.w2 * r.w2;
            let lam = 0.5 * (s + (s * s + 4.0 * w).sqrt());
            return Ok(([lam, w], [lam, 1.0], 0));
        }
        let back = boundary_vector(theta, 0.0, Direction::Backward, self.layers, -1, self.tol)?;
        let fwd = boundary_vector(theta, 0.0, Direction::Forward, self.layers, self.pair.y + 1, self.tol)?;
        Ok(([back.v[0].re, back.v[1].re], [fwd.v[0].re, fwd.v[1].re], back.layers_used.max(fwd.layers_used)))
    }

    /// Boundary-vector ratio with `Π_{r=0}^{y−1} w2(r)` folded in.
    fn boundary(&self, theta: f64) -> Result<Boundary> {
        let (vb, vf, layers) = self.vectors(theta)?;
        let mut acc = ProductAccumulator::<f64>::new();
        let mut log_w2 = 0.0;
        for r in 0..=self.pair.y {
            acc.absorb(&self.matrix(theta, r)?);
            if r < self.pair.y {
                log_w2 += self.layers.get(r)?.w2.ln();
            }
        }
        let p = acc.current().apply(vf);
        let denom = vb[0] * p[0] + vb[1] * p[1];
        Ok(Boundary { ratio: vb[0] * vf[0] / denom * (log_w2 - acc.log_scale()).exp(), layers })
    }

    /// `⟨M_1 ⋯ M_{y−1} e1, e1⟩ / Π_{r=0}^{y−1} e^{H1} w2(r)`.
    fn interior(&self, phi: f64, h1: f64) -> Result<f64> {
        let mut acc = ProductAccumulator::<f64>::new();
        let mut log_den = h1 + self.layers.get(0)?.w2.ln();
        for r in 1..self.pair.y {
            acc.absorb(&self.matrix(phi, r)?);
            log_den += h1 + self.layers.get(r)?.w2.ln();
        }
        Ok(acc.current().a * (acc.log_scale() - log_den).exp())
    }

    fn prefactor(&self) -> Result<f64> {
        let sign = if self.pair.y % 2 == 1 { 1.0 } else { -1.0 };
        Ok(4.0 / (PI * PI) * sign * self.layers.get(self.pair.y)?.w1 * self.layers.get(0)?.w1)
    }
}

/// Integral of `f` over `[a, b]` split at `cuts`, each piece adaptive.
fn integrate<F: Fn(f64) -> Result<f64> + Sync>(f: &F, cuts: &[f64], rel_tol: f64, max_depth: u32) -> Result<(f64, f64)> {
    let coarse: f64 = cuts.windows(2).map(|w| gauss_legendre(16, w[0], w[1], |t| f(t).unwrap_or(0.0))).sum::<f64>().abs();
    let pieces: Vec<(f64, f64)> = cuts
        .par_windows(2)
        .map(|w| {
            let mut g = |t: f64| f(t);
            let q = adaptive_gl(&mut g, w[0], w[1], rel_tol * coarse / cuts.len() as f64, rel_tol, max_depth)?;
            Ok((q.value, q.error))
        })
        .collect::<Result<_>>()?;
    Ok(pieces.iter().fold((0.0, 0.0), |(v, e), (pv, pe)| (v + pv, e + pe)))
}

/// `∫_{θ→0}^{π/2} g(θ) dθ` in the variable `u = log θ`, pushing the lower
/// limit down until the neglected tail is below `tail_tol · |I|`.
fn integrate_from_zero<F: Fn(f64) -> Result<f64> + Sync>(g: &F, theta_start: f64, spec: &QuadSpec) -> Result<(f64, f64)> {
    let h = |u: f64| -> Result<f64> {
        let t = u.exp();
        Ok(g(t)? * t)
    };
    let top = FRAC_PI_2.ln();
    let mut lo = theta_start.ln().min(top - 1.0);
    let mut cuts: Vec<f64> = Vec::new();
    let mut u = top;
    while u > lo {
        cuts.push(u);
        u -= 1.0;
    }
    cuts.push(lo);
    cuts.reverse();
    let (mut value, mut error) = integrate(&h, &cuts, spec.rel_tol, spec.max_depth)?;
    for _ in 0..200 {
        let tail = h(lo)?.abs();
        if tail <= spec.tail_tol * value.abs() || value == 0.0 && tail == 0.0 {
            return Ok((value, error + tail));
        }
        let new_lo = lo - 2.0;
        let (v, e) = integrate(&h, &[new_lo, new_lo + 1.0, lo], spec.rel_tol, spec.max_depth)?;
        value += v;
        error += e;
        lo = new_lo;
    }
    Err(Error::Quadrature(format!("small-θ tail still above tolerance at θ = {:e}", lo.exp())))
}

fn check_quadrature(value: f64, error: f64, spec: &QuadSpec) -> Result<()> {
    if error > 10.0 * spec.rel_tol * value.abs() + f64::MIN_POSITIVE && error > 1e-300 {
        return Err(Error::Quadrature(format!("error {error:e} on value {value:e}")));
    }
    Ok(())
}

/// `Cov(e, e′)` at `H1 = H2 = 0`: `(4/π²)(−1)^{y+1} w1(y) w1(0) I²`.
pub fn covariance_h1_zero(pair: EdgePair, layers: &LayeredSample, spec: &QuadSpec) -> Result<CovResult> {
    let k = Kernel::new(layers, pair, spec.vec_tol)?;
    let used = std::sync::atomic::AtomicUsize::new(0);
    let g = |t: f64| -> Result<f64> {
        let b = k.boundary(t)?;
        used.fetch_max(b.layers, std::sync::atomic::Ordering::Relaxed);
        Ok(pair.phase(t) * b.ratio)
    };
    let start = 1e-3 * (-(pair.y as f64).sqrt()).exp();
    let (i, err) = integrate_from_zero(&g, start, spec)?;
    check_quadrature(i, err, spec)?;
    let pre = k.prefactor()?;
    let (abs_i, _) = integrate_from_zero(&|t| Ok(g(t)?.abs()), start, &QuadSpec { rel_tol: 1e-4, ..*spec })?;
    Ok(CovResult {
        value: pre * i * i,
        quad_error: pre.abs() * 2.0 * i.abs() * err,
        vec_tol: spec.vec_tol,
        vec_error: pre.abs() * 2.0 * i.abs() * 4.0 * spec.vec_tol * abs_i,
        curve_error: 0.0,
        seed: layers.seed(),
        layers_used: used.into_inner(),
    })
}

/// Panel cuts on `[a, b]` refined geometrically toward `at` (one of the ends).
fn cuts_toward(a: f64, b: f64, at: f64, levels: usize) -> Vec<f64> {
    let mut c = vec![a, b];
    for j in 1..=levels {
        let d = (b - a) * 10f64.powi(-(j as i32));
        c.push(if at == a { a + d } else { b - d });
    }
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// `Cov(e, e′)` for `0 < H1 < H_c`, `H2 = 0`, with `θ_c` from `curve`.
pub fn covariance_liquid(pair: EdgePair, h1: f64, layers: &LayeredSample, curve: &SpectralCurve, spec: &QuadSpec) -> Result<CovResult> {
    if curve.h2() != 0.0 || curve.gamma() != 1.0 {
        return Err(Error::Precondition("liquid covariance needs an H2 = 0, γ = 1 curve".into()));
    }
    let tc = match invert_curve(curve, h1) {
        Inversion::Interior(t) if h1 > 0.0 => t,
        _ => return Err(Error::Precondition(format!("H1 = {h1} is outside (0, H_c)"))),
    };
    let k = Kernel::new(layers, pair, spec.vec_tol)?;
    let yf = pair.y as f64;
    let used = std::sync::atomic::AtomicUsize::new(0);
    let outer = |t: f64, sign: f64| -> Result<f64> {
        let b = k.boundary(t)?;
        used.fetch_max(b.layers, std::sync::atomic::Ordering::Relaxed);
        Ok(pair.phase(t) * b.ratio * (sign * h1 * yf).exp())
    };
    let inner = |t: f64| -> Result<f64> { Ok(pair.phase(t) * k.interior(t, h1)?) };
    let up = cuts_toward(tc, FRAC_PI_2, tc, 6);
    let down = cuts_toward(0.0, tc, tc, 6);
    let (i1, e1) = integrate(&|t| outer(t, 1.0), &up, spec.rel_tol, spec.max_depth)?;
    let (i2, e2) = integrate(&inner, &down, spec.rel_tol, spec.max_depth)?;
    let (i3, e3) = integrate(&|t| outer(t, -1.0), &up, spec.rel_tol, spec.max_depth)?;
    let sgn = if pair.y % 2 == 1 { 1.0 } else { -1.0 };
    let bracket = sgn * i2 + i3;
    let pre = k.prefactor()?;
    let quad = pre.abs() * (e1 * bracket.abs() + i1.abs() * (e2 + e3));
    // θ_c moves by δ = stderr / 𝓛′(θ_c)
    let slope = (curve.eval((tc + 1e-4).min(FRAC_PI_2)) - curve.eval((tc - 1e-4).max(0.0))) / (2e-4);
    let delta = if slope > 0.0 { curve.stderr(tc) / slope } else { 0.0 };
    let (f1, f2, f3) = (outer(tc, 1.0)?, inner(tc)?, outer(tc, -1.0)?);
    let curve_error = pre.abs() * delta * (f1.abs() * bracket.abs() + i1.abs() * (f2.abs() + f3.abs()));
    Ok(CovResult {
        value: pre * i1 * bracket,
        quad_error: quad,
        vec_tol: spec.vec_tol,
        vec_error: pre.abs() * 8.0 * spec.vec_tol * (i1 * bracket).abs(),
        curve_error,
        seed: layers.seed(),
        layers_used: used.into_inner(),
    })
}

/// How `x` is chosen at each `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XRule {
    /// `x = 0`; even `y` are skipped (inadmissible).
    Zero,
    /// the admissible `x ∈ {x0, x0 + 1}` for each `y`.
    Fixed(i64),
    /// `x = round(c·y)` adjusted up to an admissible value.
    Proportional(f64),
}

impl XRule {
    fn pick(&self, y: i64) -> Option<i64> {
        let fix = |x: i64| if (x + y).rem_euclid(2) == 1 { x } else { x + 1 };
        match *self {
            XRule::Zero => ((y % 2) == 1).then_some(0),
            XRule::Fixed(x0) => Some(fix(x0)),
            XRule::Proportional(c) => Some(fix((c * y as f64).round() as i64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub y: i64,
    pub x: i64,
    pub cov: CovResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    pub rows: Vec<DecayRow>,
    /// Inadmissible `y` skipped and layer-cap retries.
    pub warnings: Vec<String>,
}

fn covariance_at(pair: EdgePair, h1: f64, layers: &LayeredSample, curve: Option<&SpectralCurve>, spec: &QuadSpec) -> Result<CovResult> {
    if h1 == 0.0 {
        covariance_h1_zero(pair, layers, spec)
    } else {
        let c = curve.ok_or_else(|| Error::Precondition("liquid profile needs a spectral curve".into()))?;
        covariance_liquid(pair, h1, layers, c, spec)
    }
}

fn check_y_list(y_list: &[i64]) -> Result<i64> {
    if y_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("y list must be increasing".into()));
    }
    y_list.last().copied().ok_or(Error::EmptyRange)
}

/// Covariances along `y_list` on one fixed realization of `law`, with
/// `spec.max_layers` rows on either side. A boundary vector that does not
/// converge triggers a retry with ten times as many rows.
/// `curve` is required when `h1 ≠ 0`.
pub fn decay_profile(h1: f64, law: &DisorderLaw, seed: u64, y_list: &[i64], x_rule: XRule, curve: Option<&SpectralCurve>, spec: &QuadSpec) -> Result<DecayProfile> {
    let y_max = check_y_list(y_list)?;
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    let mut cap = spec.max_layers;
    let mut layers = sample_layers(law, -(cap as i64)..y_max + 1 + cap as i64, seed)?;
    for &y in y_list {
        let Some(x) = x_rule.pick(y) else {
            warnings.push(format!("y = {y} skipped: x + y must be odd"));
            continue;
        };
        let pair = EdgePair::new(x, y)?;
        loop {
            match covariance_at(pair, h1, &layers, curve, &QuadSpec { max_layers: cap, ..*spec }) {
                Err(Error::NonConvergence { .. }) if cap < 1_000_000 => {
                    cap *= 10;
                    warnings.push(format!("y = {y}: boundary vectors needed more than {} layers, retrying with {cap}", cap / 10));
                    layers = sample_layers(law, -(cap as i64)..y_max + 1 + cap as i64, seed)?;
                }
                r => {
                    rows.push(DecayRow { y, x, cov: r? });
                    break;
                }
            }
        }
    }
    Ok(DecayProfile { rows, warnings })
}

/// Like [`decay_profile`] on given layers, without retries.
pub fn decay_profile_on(h1: f64, layers: &LayeredSample, y_list: &[i64], x_rule: XRule, curve: Option<&SpectralCurve>, spec: &QuadSpec) -> Result<DecayProfile> {
    check_y_list(y_list)?;
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    for &y in y_list {
        let Some(x) = x_rule.pick(y) else {
            warnings.push(format!("y = {y} skipped: x + y must be odd"));
            continue;
        };
        rows.push(DecayRow { y, x, cov: covariance_at(EdgePair::new(x, y)?, h1, layers, curve, spec)? });
    }
    Ok(DecayProfile { rows, warnings })
}
