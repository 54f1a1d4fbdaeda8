//! Small numerical helpers shared by several modules: Gauss–Legendre panels,
//! adaptive quadrature, isotonic regression, monotone cubic interpolation,
//! least squares and overflow-safe complex numbers.

use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::{Error, Result};

fn rule(deg: usize) -> &'static [(f64, f64)] {
    static R8: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static R16: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static R32: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let cell = match deg {
        8 => &R8,
        16 => &R16,
        32 => &R32,
        _ => panic!("unsupported Gauss-Legendre degree {deg}"),
    };
    cell.get_or_init(|| {
        GaussLegendre::new(deg)
            .expect("degree >= 2")
            .iter()
            .map(|(x, w)| (*x, *w))
            .collect()
    })
}

/// Gauss–Legendre rule of degree 8, 16 or 32 on `[a, b]`.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(deg: usize, a: f64, b: f64, mut f: F) -> f64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (b + a);
    let mut s = 0.0;
    for &(x, w) in rule(deg) {
        s += w * f(m + h * x);
    }
    s * h
}

/// Nodes and weights of a degree-`deg` rule mapped to `[a, b]`.
pub fn gauss_legendre_nodes(deg: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let h = 0.5 * (b - a);
    let m = 0.5 * (b + a);
    rule(deg).iter().map(|&(x, w)| (m + h * x, w * h)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadValue {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive bisection with an 8-point rule; a panel is accepted when the
/// rule on the panel and on its two halves agree.
pub fn adaptive_gl<F>(f: &mut F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_depth: u32) -> Result<QuadValue>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut evals = 0usize;
    let panel = |f: &mut F, lo: f64, hi: f64, evals: &mut usize| -> Result<f64> {
        let mut s = 0.0;
        let h = 0.5 * (hi - lo);
        let m = 0.5 * (hi + lo);
        for &(x, w) in rule(8) {
            s += w * f(m + h * x)?;
        }
        *evals += 8;
        Ok(s * h)
    };
    let whole = panel(f, a, b, &mut evals)?;
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut total = 0.0;
    let mut err = 0.0;
    let mut scale = whole.abs();
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(f, lo, mid, &mut evals)?;
        let right = panel(f, mid, hi, &mut evals)?;
        let fine = left + right;
        let diff = (fine - est).abs();
        scale = scale.max(fine.abs());
        let width = (hi - lo) / (b - a);
        let local_tol = (abs_tol.max(rel_tol * scale)) * width.max(1e-3);
        if diff <= local_tol || depth >= max_depth {
            if depth >= max_depth && diff > local_tol {
                err += diff;
            } else {
                err += diff / 15.0;
            }
            total += fine;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    Ok(QuadValue { value: total, error: err, evaluations: evals })
}

/// Weighted pool-adjacent-violators: the non-decreasing sequence closest to
/// `y` in the weighted least-squares sense.
pub fn isotonic_regression(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len());
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        let mut cur = (yi * wi, wi, 1usize);
        while let Some(&(s, ww, n)) = blocks.last() {
            if s / ww > cur.0 / cur.1 {
                blocks.pop();
                cur = (cur.0 + s, cur.1 + ww, cur.2 + n);
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(y.len());
    for (s, ww, n) in blocks {
        out.extend(std::iter::repeat(s / ww).take(n));
    }
    out
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Precondition("pchip needs at least two matching points".into()));
        }
        if x.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Precondition("pchip abscissae must increase strictly".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    d[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Fit(format!("need at least two points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Ok(LineFit { slope, intercept, slope_stderr, r_squared })
}

/// Root of `f` on `[a, b]` by bisection; `f(a)` and `f(b)` must differ in sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    if fa == 0.0 {
        return Ok(a);
    }
    let fb = f(b);
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Precondition(format!("no sign change on [{a}, {b}]")));
    }
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// `log(2 cosh x)` without overflow.
pub fn log_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Complex number stored as `mant · e^{log}` with `|mant|` kept near 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mant: Complex64,
    pub log: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled { mant: Complex64 { re: 0.0, im: 0.0 }, log: f64::NEG_INFINITY };
    pub const ONE: Scaled = Scaled { mant: Complex64 { re: 1.0, im: 0.0 }, log: 0.0 };

    pub fn new(mant: Complex64, log: f64) -> Self {
        Self { mant, log }.normalized()
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z, 0.0)
    }

    pub fn from_log(log: f64) -> Self {
        Self { mant: Complex64::new(1.0, 0.0), log }
    }

    pub fn normalized(self) -> Self {
        let m = self.mant.norm();
        if m == 0.0 || !m.is_finite() {
            return if m == 0.0 { Self::ZERO } else { self };
        }
        Self { mant: self.mant / m, log: self.log + m.ln() }
    }

    pub fn is_zero(&self) -> bool {
        self.mant == Complex64::new(0.0, 0.0)
    }

    pub fn mul(self, o: Scaled) -> Scaled {
        Scaled::new(self.mant * o.mant, self.log + o.log)
    }

    pub fn div(self, o: Scaled) -> Scaled {
        Scaled::new(self.mant / o.mant, self.log - o.log)
    }

    pub fn scale_c(self, z: Complex64) -> Scaled {
        Scaled::new(self.mant * z, self.log)
    }

    pub fn add(self, o: Scaled) -> Scaled {
        if self.is_zero() {
            return o;
        }
        if o.is_zero() {
            return self;
        }
        let top = self.log.max(o.log);
        Scaled::new(self.mant * (self.log - top).exp() + o.mant * (o.log - top).exp(), top)
    }

    pub fn neg(self) -> Scaled {
        Scaled { mant: -self.mant, log: self.log }
    }

    pub fn log_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.log + self.mant.norm().ln()
        }
    }

    pub fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            Complex64::new(0.0, 0.0)
        } else {
            self.mant * self.log.exp()
        }
    }
}

/// Neumaier-compensated sum of scaled terms aligned to the largest
/// magnitude. Returns the sum and the ratio |sum| / max|term|.
pub fn compensated_sum(terms: &[Scaled]) -> (Scaled, f64) {
    let top = terms.iter().filter(|t| !t.is_zero()).map(|t| t.log).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return (Scaled::ZERO, 0.0);
    }
    let vals: Vec<Complex64> = terms.iter().map(|t| if t.is_zero() { Complex64::new(0.0, 0.0) } else { t.mant * (t.log - top).exp() }).collect();
    let part = |get: &dyn Fn(&Complex64) -> f64| {
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for v in &vals {
            let x = get(v);
            let t = s + x;
            if s.abs() >= x.abs() {
                c += (s - t) + x;
            } else {
                c += (x - t) + s;
            }
            s = t;
        }
        s + c
    };
    let sum = Complex64::new(part(&|z| z.re), part(&|z| z.im));
    let biggest = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let ratio = if biggest > 0.0 { sum.norm() / biggest } else { 0.0 };
    (Scaled::new(sum, top), ratio)
}
