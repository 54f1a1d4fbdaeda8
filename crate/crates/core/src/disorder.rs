//! Disorder laws for the layer weights `(w1, w2)` and counter-based sampling.
//!
//! Row `y` of a realization depends only on `(seed, y)`: the ChaCha keystream
//! for `seed` is addressed at word `4·(y + 2^62)`, two 64-bit draws per row.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

const ROW_OFFSET: i128 = 1 << 62;
const WORDS_PER_ROW: u128 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum W2Law {
    /// `w2 = a` with probability `p`, `w2 = b` otherwise.
    TwoPoint { a: f64, b: f64, p: f64 },
    /// `log w2` uniform on `[ln lo, ln hi]`.
    LogUniform { lo: f64, hi: f64 },
    FiniteDiscrete { values: Vec<f64>, probs: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum W1Law {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    TwoPoint,
    LogUniform,
    FiniteDiscrete,
}

/// Law of one layer. `w2` is multiplied by `normalization` when sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderLaw {
    w2: W2Law,
    w1: W1Law,
    normalization: f64,
}

impl DisorderLaw {
    /// Unnormalized law; call [`normalize_law`] before sampling.
    pub fn new(w2: W2Law, w1: W1Law) -> Result<Self> {
        let law = Self { w2, w1, normalization: 1.0 };
        law.validate()?;
        Ok(law)
    }

    /// `log w2 = ±σ` with equal probabilities (already centered).
    pub fn two_point_symmetric(sigma: f64) -> Result<Self> {
        let s = sigma.abs();
        normalize_law(&Self::new(W2Law::TwoPoint { a: s.exp(), b: (-s).exp(), p: 0.5 }, W1Law::Constant(1.0))?)
    }

    /// `log w2` uniform on `[-s, s]`.
    pub fn log_uniform_symmetric(s: f64) -> Result<Self> {
        let s = s.abs();
        normalize_law(&Self::new(W2Law::LogUniform { lo: (-s).exp(), hi: s.exp() }, W1Law::Constant(1.0))?)
    }

    pub fn with_w1(mut self, w1: W1Law) -> Result<Self> {
        self.w1 = w1;
        self.validate()?;
        Ok(self)
    }

    pub fn kind(&self) -> LawKind {
        match self.w2 {
            W2Law::TwoPoint { .. } => LawKind::TwoPoint,
            W2Law::LogUniform { .. } => LawKind::LogUniform,
            W2Law::FiniteDiscrete { .. } => LawKind::FiniteDiscrete,
        }
    }

    pub fn w2_law(&self) -> &W2Law {
        &self.w2
    }

    pub fn w1_law(&self) -> W1Law {
        self.w1
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Support of the normalized `w2`.
    pub fn support_w2(&self) -> (f64, f64) {
        let c = self.normalization;
        let (lo, hi) = match &self.w2 {
            W2Law::TwoPoint { a, b, .. } => (a.min(*b), a.max(*b)),
            W2Law::LogUniform { lo, hi } => (*lo, *hi),
            W2Law::FiniteDiscrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, p)| **p > 0.0)
                .fold((f64::INFINITY, 0.0f64), |(l, h), (v, _)| (l.min(*v), h.max(*v))),
        };
        (c * lo, c * hi)
    }

    pub fn support_w1(&self) -> (f64, f64) {
        match self.w1 {
            W1Law::Constant(c) => (c, c),
            W1Law::Uniform { lo, hi } => (lo, hi),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidLaw(m.to_string()));
        match &self.w2 {
            W2Law::TwoPoint { a, b, p } => {
                if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) {
                    return bad("two-point values must be positive and finite");
                }
                if !(*p > 0.0 && *p < 1.0) || a == b {
                    return bad("w2 is deterministic");
                }
            }
            W2Law::LogUniform { lo, hi } => {
                if !(*lo > 0.0 && hi.is_finite()) {
                    return bad("log-uniform support must be positive and bounded");
                }
                if hi <= lo {
                    return bad("w2 is deterministic");
                }
            }
            W2Law::FiniteDiscrete { values, probs } => {
                if values.len() != probs.len() || values.is_empty() {
                    return bad("values and probabilities must have equal nonzero length");
                }
                if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) || probs.iter().any(|p| *p < 0.0) {
                    return bad("values must be positive, probabilities nonnegative");
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad("probabilities must sum to 1");
                }
                let atoms: Vec<f64> = values.iter().zip(probs).filter(|(_, p)| **p > 0.0).map(|(v, _)| *v).collect();
                if atoms.iter().all(|v| *v == atoms[0]) {
                    return bad("w2 is deterministic");
                }
            }
        }
        match self.w1 {
            W1Law::Constant(c) if !(c > 0.0 && c.is_finite()) => bad("w1 must be positive"),
            W1Law::Uniform { lo, hi } if !(lo > 0.0 && hi >= lo && hi.is_finite()) => bad("w1 support must be positive"),
            _ => Ok(()),
        }
    }

    fn raw_mean_log(&self) -> f64 {
        match &self.w2 {
            W2Law::TwoPoint { a, b, p } => p * a.ln() + (1.0 - p) * b.ln(),
            W2Law::LogUniform { lo, hi } => 0.5 * (lo.ln() + hi.ln()),
            W2Law::FiniteDiscrete { values, probs } => values.iter().zip(probs).map(|(v, p)| p * v.ln()).sum(),
        }
    }

    /// `E log w2` of the normalized law.
    pub fn mean_log_w2(&self) -> f64 {
        self.raw_mean_log() + self.normalization.ln()
    }

    /// `Var(log w2)`, exact.
    pub fn log_variance(&self) -> f64 {
        match &self.w2 {
            W2Law::TwoPoint { a, b, p } => p * (1.0 - p) * (a.ln() - b.ln()).powi(2),
            W2Law::LogUniform { lo, hi } => (hi.ln() - lo.ln()).powi(2) / 12.0,
            W2Law::FiniteDiscrete { values, probs } => {
                let m = self.raw_mean_log();
                values.iter().zip(probs).map(|(v, p)| p * (v.ln() - m).powi(2)).sum()
            }
        }
    }

    /// `log E[w2^q]` of the normalized law, exact and overflow-safe.
    pub fn log_moment_w2(&self, q: f64) -> f64 {
        let lc = self.normalization.ln();
        let body = match &self.w2 {
            W2Law::TwoPoint { a, b, p } => log_sum_exp(&[p.ln() + q * a.ln(), (1.0 - p).ln() + q * b.ln()]),
            W2Law::LogUniform { lo, hi } => {
                let (u, v) = (lo.ln(), hi.ln());
                let h = 0.5 * (v - u);
                let m = 0.5 * (v + u);
                q * m + log_sinhc(q * h)
            }
            W2Law::FiniteDiscrete { values, probs } => {
                let terms: Vec<f64> = values.iter().zip(probs).filter(|(_, p)| **p > 0.0).map(|(v, p)| p.ln() + q * v.ln()).collect();
                log_sum_exp(&terms)
            }
        };
        body + q * lc
    }

    /// Draw `(w1, w2)` from two uniforms in `[0, 1)`.
    #[inline]
    pub fn draw(&self, u1: f64, u2: f64) -> Row {
        let w1 = match self.w1 {
            W1Law::Constant(c) => c,
            W1Law::Uniform { lo, hi } => lo + u1 * (hi - lo),
        };
        let w2 = match &self.w2 {
            W2Law::TwoPoint { a, b, p } => {
                if u2 < *p {
                    *a
                } else {
                    *b
                }
            }
            W2Law::LogUniform { lo, hi } => (lo.ln() + u2 * (hi.ln() - lo.ln())).exp(),
            W2Law::FiniteDiscrete { values, probs } => {
                let mut acc = 0.0;
                let mut out = *values.last().unwrap();
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u2 < acc {
                        out = *v;
                        break;
                    }
                }
                out
            }
        } * self.normalization;
        Row { w1, w2 }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log(sinh(x)/x)`.
fn log_sinhc(x: f64) -> f64 {
    let a = x.abs();
    if a < 1e-4 {
        a * a / 6.0
    } else if a < 20.0 {
        (a.sinh() / a).ln()
    } else {
        a - (2.0 * a).ln() + (-2.0 * a).exp().ln_1p()
    }
}

/// Rescale `w2` so that `E log w2 = 0` exactly.
pub fn normalize_law(law: &DisorderLaw) -> Result<DisorderLaw> {
    law.validate()?;
    let mut out = law.clone();
    out.normalization = (-law.raw_mean_log()).exp();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub w1: f64,
    pub w2: f64,
}

/// Rows `w(y)` for `y` in `[start, start + rows.len())`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredSample {
    start: i64,
    rows: Vec<Row>,
    seed: u64,
    law: Option<DisorderLaw>,
    gamma: f64,
}

#[inline]
fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// I.i.d. rows over `y_range`, reproducible from `(seed, y)` alone.
pub fn sample_layers(law: &DisorderLaw, y_range: std::ops::Range<i64>, seed: u64) -> Result<LayeredSample> {
    if y_range.is_empty() {
        return Err(Error::EmptyRange);
    }
    if law.mean_log_w2().abs() > 1e-12 {
        return Err(Error::InvalidLaw("law must be normalized before sampling".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(((y_range.start as i128 + ROW_OFFSET) as u128) * WORDS_PER_ROW);
    let (lo2, hi2) = law.support_w2();
    let (lo1, hi1) = law.support_w1();
    let rows = y_range
        .clone()
        .map(|_| {
            let u1 = unit(rng.next_u64());
            let u2 = unit(rng.next_u64());
            let r = law.draw(u1, u2);
            debug_assert!(r.w2 >= lo2 * (1.0 - 1e-12) && r.w2 <= hi2 * (1.0 + 1e-12));
            debug_assert!(r.w1 >= lo1 && r.w1 <= hi1);
            r
        })
        .collect();
    Ok(LayeredSample { start: y_range.start, rows, seed, law: Some(law.clone()), gamma: 1.0 })
}

/// `w2(y)` multiplied by `γ` on even rows and `1/γ` on odd rows.
pub fn gamma_modulated_view(sample: &LayeredSample, gamma: f64) -> Result<LayeredSample> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::Precondition(format!("gamma must be >= 1, got {gamma}")));
    }
    let mut out = sample.clone();
    for (i, r) in out.rows.iter_mut().enumerate() {
        let y = sample.start + i as i64;
        if y.rem_euclid(2) == 0 {
            r.w2 *= gamma;
        } else {
            r.w2 /= gamma;
        }
    }
    out.gamma = sample.gamma * gamma;
    Ok(out)
}

impl LayeredSample {
    /// Deterministic rows, e.g. the pure model or hand-built test fields.
    pub fn from_rows(start: i64, rows: Vec<Row>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyRange);
        }
        if rows.iter().any(|r| !(r.w1 > 0.0 && r.w2 > 0.0 && r.w1.is_finite() && r.w2.is_finite())) {
            return Err(Error::InvalidLaw("weights must be positive and finite".into()));
        }
        Ok(Self { start, rows, seed: 0, law: None, gamma: 1.0 })
    }

    pub fn constant(start: i64, len: usize, w1: f64, w2: f64) -> Result<Self> {
        Self::from_rows(start, vec![Row { w1, w2 }; len])
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.start + self.rows.len() as i64
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn law(&self) -> Option<&DisorderLaw> {
        self.law.as_ref()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn contains(&self, y: i64) -> bool {
        y >= self.start && y < self.end()
    }

    pub fn get(&self, y: i64) -> Result<Row> {
        if !self.contains(y) {
            return Err(Error::RowOutOfRange { y, lo: self.start, hi: self.end() });
        }
        Ok(self.rows[(y - self.start) as usize])
    }

    /// Rows `[lo, hi)` as a slice.
    pub fn slice(&self, lo: i64, hi: i64) -> Result<&[Row]> {
        if lo > hi || !self.contains(lo) || (hi > lo && !self.contains(hi - 1)) {
            return Err(Error::RowOutOfRange { y: if self.contains(lo) { hi - 1 } else { lo }, lo: self.start, hi: self.end() });
        }
        Ok(&self.rows[(lo - self.start) as usize..(hi - self.start) as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_normalization() {
        let law = DisorderLaw::new(W2Law::TwoPoint { a: 2.0, b: 1.0, p: 0.5 }, W1Law::Constant(1.0)).unwrap();
        let n = normalize_law(&law).unwrap();
        assert_relative_eq!(n.normalization(), 2f64.powf(-0.5), epsilon = 1e-15);
        assert!(n.mean_log_w2().abs() < 1e-15);
        let s = DisorderLaw::two_point_symmetric(0.7).unwrap();
        assert_relative_eq!(s.normalization(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.log_variance(), 0.49, epsilon = 1e-14);
    }

    #[test]
    fn log_uniform_normalization_matches_quadrature() {
        let law = DisorderLaw::new(W2Law::LogUniform { lo: 1.0, hi: 3.0 }, W1Law::Constant(1.0)).unwrap();
        let n = normalize_law(&law).unwrap();
        // E log(c w2) with log w2 uniform, by midpoint quadrature
        let m = 20000;
        let c = n.normalization();
        let q: f64 = (0..m)
            .map(|i| {
                let t = (i as f64 + 0.5) / m as f64;
                (c * (3f64.ln() * t).exp()).ln()
            })
            .sum::<f64>()
            / m as f64;
        assert!(q.abs() < 1e-10);
        let s = DisorderLaw::log_uniform_symmetric(1.5).unwrap();
        assert_relative_eq!(s.log_variance(), 1.5 * 1.5 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(DisorderLaw::new(W2Law::TwoPoint { a: 1.0, b: 1.0, p: 0.5 }, W1Law::Constant(1.0)).is_err());
        assert!(DisorderLaw::new(W2Law::LogUniform { lo: 0.0, hi: 1.0 }, W1Law::Constant(1.0)).is_err());
        assert!(DisorderLaw::new(W2Law::TwoPoint { a: -1.0, b: 1.0, p: 0.5 }, W1Law::Constant(1.0)).is_err());
        let fd = W2Law::FiniteDiscrete { values: vec![1.0, 2.0], probs: vec![1.0, 0.0] };
        assert!(DisorderLaw::new(fd, W1Law::Constant(1.0)).is_err());
    }

    #[test]
    fn moments_match_closed_forms() {
        let s = DisorderLaw::two_point_symmetric(1.0).unwrap();
        assert_relative_eq!(s.log_moment_w2(2.0), (2f64).cosh().ln(), epsilon = 1e-14);
        let u = DisorderLaw::log_uniform_symmetric(1.0).unwrap();
        assert_relative_eq!(u.log_moment_w2(1.0), (1f64.sinh()).ln(), epsilon = 1e-14);
        assert_relative_eq!(u.log_moment_w2(400.0), (400f64).ln().mul_add(-1.0, 400.0) - 2f64.ln() + 0.0, epsilon = 1e-12);
        assert_eq!(u.log_moment_w2(0.0), 0.0);
    }

    #[test]
    fn sampling_is_counter_based() {
        let law = DisorderLaw::two_point_symmetric(1.0).unwrap();
        let a = sample_layers(&law, 0..10, 7).unwrap();
        let b = sample_layers(&law, 5..15, 7).unwrap();
        assert_eq!(a.slice(5, 10).unwrap(), b.slice(5, 10).unwrap());
        let c = sample_layers(&law, -20..3, 7).unwrap();
        assert_eq!(c.slice(0, 3).unwrap(), a.slice(0, 3).unwrap());
        assert_eq!(sample_layers(&law, 0..10, 7).unwrap(), a);
        assert_ne!(sample_layers(&law, 0..10, 8).unwrap().rows(), a.rows());
        assert!(sample_layers(&law, 3..3, 7).is_err());
    }

    #[test]
    fn gamma_view() {
        let s = LayeredSample::constant(0, 4, 1.0, 1.0).unwrap();
        let g = gamma_modulated_view(&s, 2.0).unwrap();
        let w: Vec<f64> = g.rows().iter().map(|r| r.w2).collect();
        assert_eq!(w, vec![2.0, 0.5, 2.0, 0.5]);
        assert_eq!(gamma_modulated_view(&s, 1.0).unwrap().rows(), s.rows());
        assert!(gamma_modulated_view(&s, 0.5).is_err());
        let neg = LayeredSample::constant(-3, 2, 1.0, 1.0).unwrap();
        let g = gamma_modulated_view(&neg, 3.0).unwrap();
        assert_relative_eq!(g.rows()[0].w2, 1.0 / 3.0);
        assert_relative_eq!(g.rows()[1].w2, 3.0);
    }
}
