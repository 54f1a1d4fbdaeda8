//! Renormalized products of 2×2 matrices, top Lyapunov exponent estimators
//! and boundary vectors of one-sided infinite products.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::disorder::{gamma_modulated_view, sample_layers, DisorderLaw, LayeredSample, Row};
use crate::poincare::{image_of_halfplane_single, Homography, Region};
use crate::{Error, Result};

/// Matrix entry type: `f64` on the real axis, `Complex64` otherwise.
pub trait Scalar: Copy + Send + Sync + PartialEq + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn conj(self) -> Self;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn one() -> Self {
        1.0
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2<T = Complex64> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

pub type Mat2r = Mat2<f64>;

impl<T: Scalar> Mat2<T> {
    #[inline]
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    #[inline]
    pub fn mul(&self, o: &Self) -> Self {
        Self {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// Entrywise ℓ¹ norm.
    #[inline]
    pub fn l1(&self) -> f64 {
        self.a.modulus() + self.b.modulus() + self.c.modulus() + self.d.modulus()
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Self {
        Self { a: self.a.scale(s), b: self.b.scale(s), c: self.c.scale(s), d: self.d.scale(s) }
    }

    pub fn trace(&self) -> T {
        self.a + self.d
    }

    pub fn det(&self) -> T {
        self.a * self.d - self.b * self.c
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.a.conj(), self.c.conj(), self.b.conj(), self.d.conj())
    }

    #[inline]
    pub fn apply(&self, v: [T; 2]) -> [T; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Row vector times matrix.
    #[inline]
    pub fn apply_left(&self, v: [T; 2]) -> [T; 2] {
        [v[0] * self.a + v[1] * self.c, v[0] * self.b + v[1] * self.d]
    }

    pub fn to_complex(&self) -> Mat2<Complex64> {
        Mat2::new(self.a.to_complex(), self.b.to_complex(), self.c.to_complex(), self.d.to_complex())
    }

    pub fn homography(&self) -> Homography {
        Homography { a: self.a.to_complex(), b: self.b.to_complex(), c: self.c.to_complex(), d: self.d.to_complex() }
    }
}

/// `[[2 w1 sin(θ + ιH2), w2²], [1, 0]]`.
pub fn make_dimer_matrix(theta: f64, h2: f64, w1: f64, w2: f64) -> Mat2 {
    let s = Complex64::new(theta.sin() * h2.cosh(), theta.cos() * h2.sinh()) * (2.0 * w1);
    Mat2::new(s, Complex64::new(w2 * w2, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
}

/// Real specialization of [`make_dimer_matrix`] at `H2 = 0`.
#[inline]
pub fn make_dimer_matrix_real(theta: f64, w1: f64, w2: f64) -> Mat2r {
    Mat2::new(2.0 * w1 * theta.sin(), w2 * w2, 1.0, 0.0)
}

/// `𝕄^z = [[z w1, w2²], [1, 0]]`.
pub fn make_m_matrix(z: Complex64, w1: f64, w2: f64) -> Mat2 {
    Mat2::new(z * w1, Complex64::new(w2 * w2, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
}

/// Transfer matrix of the tridiagonal recursion: `[[2 w1 cos(θ + ιH2), w2²], [1, 0]]`.
pub fn make_r_matrix(theta: f64, h2: f64, w1: f64, w2: f64) -> Mat2 {
    let z = Complex64::new(theta.cos() * h2.cosh(), -theta.sin() * h2.sinh()) * (2.0 * w1);
    Mat2::new(z, Complex64::new(w2 * w2, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
}

/// `V^x = [[x w1/w2, −w2], [1/w2, 0]]`, determinant 1.
pub fn make_v_matrix(x: f64, w1: f64, w2: f64) -> Mat2r {
    Mat2::new(x * w1 / w2, -w2, 1.0 / w2, 0.0)
}

/// Running product `current · e^{log_scale}` with `‖current‖₁ = 1`.
#[derive(Debug, Clone, Copy)]
pub struct ProductAccumulator<T = Complex64> {
    current: Mat2<T>,
    log_scale: f64,
    pending: f64,
    steps: u64,
}

impl<T: Scalar> Default for ProductAccumulator<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ProductAccumulator<T> {
    pub fn new() -> Self {
        let id = Mat2::identity();
        Self { current: id.scale(0.5), log_scale: 2f64.ln(), pending: 1.0, steps: 0 }
    }

    /// Right-multiply by `m`.
    #[inline]
    pub fn absorb(&mut self, m: &Mat2<T>) {
        let p = self.current.mul(m);
        self.renormalize(p);
    }

    /// Left-multiply by `m`.
    #[inline]
    pub fn absorb_left(&mut self, m: &Mat2<T>) {
        let p = m.mul(&self.current);
        self.renormalize(p);
    }

    #[inline]
    fn renormalize(&mut self, p: Mat2<T>) {
        let n = p.l1();
        self.current = p.scale(1.0 / n);
        self.pending *= n;
        if !(1e-150..=1e150).contains(&self.pending) {
            self.log_scale += self.pending.ln();
            self.pending = 1.0;
        }
        self.steps += 1;
    }

    pub fn current(&self) -> &Mat2<T> {
        &self.current
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale + self.pending.ln()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `log ‖product‖₁`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale() + self.current.l1().ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapMethod {
    Norm,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapEstimate {
    pub value: f64,
    pub stderr: f64,
    pub steps: u64,
    pub method: LyapMethod,
}

/// Lyapunov exponent per matrix of the product of `n_steps` matrices from
/// `source`, with a batch-means error bar over `n_blocks` blocks.
///
/// `Trace` returns `log|Tr(M_1 ⋯ M_n)| / n`; its error bar is the batch-means
/// error of the norm increments.
pub fn lyapunov<T: Scalar, I: Iterator<Item = Mat2<T>>>(mut source: I, n_steps: usize, n_blocks: usize, method: LyapMethod) -> Result<LyapEstimate> {
    if n_blocks < 2 || n_steps < 10 * n_blocks {
        return Err(Error::Precondition(format!("need n_steps >= 10 * n_blocks with n_blocks >= 2 (got {n_steps}, {n_blocks})")));
    }
    let block_len = n_steps / n_blocks;
    let mut acc = ProductAccumulator::<T>::new();
    let mut means = Vec::with_capacity(n_blocks);
    let mut last = acc.log_norm();
    for b in 0..n_blocks {
        let len = if b + 1 == n_blocks { n_steps - block_len * (n_blocks - 1) } else { block_len };
        for _ in 0..len {
            let m = source.next().ok_or_else(|| Error::Precondition("matrix source exhausted".into()))?;
            acc.absorb(&m);
        }
        let now = acc.log_norm();
        means.push((now - last) / len as f64);
        last = now;
    }
    let stderr = batch_stderr(&means);
    let value = match method {
        LyapMethod::Norm => acc.log_norm() / n_steps as f64,
        LyapMethod::Trace => {
            let t = acc.current().trace().modulus();
            if t == 0.0 || !t.is_finite() {
                return Err(Error::DegenerateAngle);
            }
            (acc.log_scale() + t.ln()) / n_steps as f64
        }
    };
    Ok(LyapEstimate { value, stderr, steps: n_steps as u64, method })
}

fn batch_stderr(means: &[f64]) -> f64 {
    let m = means.len() as f64;
    let mu = means.iter().sum::<f64>() / m;
    let var = means.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (m - 1.0);
    (var / m).sqrt()
}

/// Lyapunov exponent per row of `∏ M^θ_{H2}(w(y))` over the rows of `sample`.
pub fn lyapunov_rows(rows: &[Row], theta: f64, h2: f64, n_blocks: usize, method: LyapMethod) -> Result<LyapEstimate> {
    if h2 == 0.0 {
        let s = 2.0 * theta.sin();
        lyapunov(rows.iter().map(|r| Mat2::new(s * r.w1, r.w2 * r.w2, 1.0, 0.0)), rows.len(), n_blocks, method)
    } else {
        lyapunov(rows.iter().map(|r| make_dimer_matrix(theta, h2, r.w1, r.w2)), rows.len(), n_blocks, method)
    }
}

/// Lyapunov exponent of the stream `V^x(w(y))`.
pub fn lyapunov_v_rows(rows: &[Row], x: f64, n_blocks: usize) -> Result<LyapEstimate> {
    lyapunov(rows.iter().map(|r| make_v_matrix(x, r.w1, r.w2)), rows.len(), n_blocks, LyapMethod::Norm)
}

/// Half the top Lyapunov exponent of the two-row products `T^θ_γ`, from
/// `n_steps` i.i.d. rows (rounded up to an even count) of `law`.
pub fn lyapunov_gamma(theta: f64, h2: f64, gamma: f64, law: &DisorderLaw, n_steps: usize, seed: u64, n_blocks: usize) -> Result<LyapEstimate> {
    let n = n_steps + n_steps % 2;
    let sample = sample_layers(law, 0..n as i64, seed)?;
    let view = gamma_modulated_view(&sample, gamma)?;
    lyapunov_rows(view.rows(), theta, h2, n_blocks, LyapMethod::Norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `V_{>y} ∝ lim M_{y+1} M_{y+2} ⋯ v`.
    Forward,
    /// `V_{<0} ∝ lim M_{-1}^* M_{-2}^* ⋯ v`.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryVector {
    /// Unit vector (ℓ²), components with positive real part.
    pub v: [Complex64; 2],
    /// Direction `v[0]/v[1]` as a point of `ℍ`.
    pub z: Complex64,
    pub layers_used: usize,
    /// Certified hyperbolic diameter of the set of possible limits.
    pub diameter: f64,
}

/// Limit direction of the one-sided product starting at row `start_y`,
/// stopping once the image of `ℍ` under the partial product has hyperbolic
/// diameter below `tol`.
pub fn boundary_vector(theta: f64, h2: f64, direction: Direction, layers: &LayeredSample, start_y: i64, tol: f64) -> Result<BoundaryVector> {
    if !(theta > 0.0) || theta > FRAC_PI_2 + 1e-12 {
        return Err(Error::Precondition(format!("boundary vectors need θ in (0, π/2], got {theta}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition("tol must be positive".into()));
    }
    let rows = layers.rows();
    let idx0 = start_y - layers.start();
    if !layers.contains(start_y) {
        return Err(Error::RowOutOfRange { y: start_y, lo: layers.start(), hi: layers.end() });
    }
    let available = match direction {
        Direction::Forward => layers.end() - start_y,
        Direction::Backward => idx0 + 1,
    };
    if h2 == 0.0 {
        let s = 2.0 * theta.sin();
        let mats = (0..available).map(|k| {
            let i = match direction {
                Direction::Forward => idx0 + k,
                Direction::Backward => idx0 - k,
            } as usize;
            let r = rows[i];
            let m = Mat2::new(s * r.w1, r.w2 * r.w2, 1.0, 0.0);
            (if direction == Direction::Backward { m.transpose() } else { m }, 2.0 * r.w2.ln())
        });
        track_limit(mats, tol)
    } else {
        let mats = (0..available).map(|k| {
            let i = match direction {
                Direction::Forward => idx0 + k,
                Direction::Backward => idx0 - k,
            } as usize;
            let r = rows[i];
            let m = make_dimer_matrix(theta, h2, r.w1, r.w2);
            (if direction == Direction::Backward { m.adjoint() } else { m }, 2.0 * r.w2.ln())
        });
        track_limit(mats, tol)
    }
}

fn track_limit<T: Scalar, I: Iterator<Item = (Mat2<T>, f64)>>(mats: I, tol: f64) -> Result<BoundaryVector> {
    let mut acc = ProductAccumulator::<T>::new();
    let mut log_det = 0.0;
    let mut diameter = f64::INFINITY;
    let mut used = 0usize;
    for (m, ld) in mats {
        acc.absorb(&m);
        log_det += ld;
        used += 1;
        if used < 2 {
            continue;
        }
        let abs_det = (log_det - 2.0 * acc.log_scale()).exp();
        let region = image_of_halfplane_single(&acc.current().homography(), Some(abs_det))?;
        if let Region::Disk(disk) = region {
            diameter = disk.diameter();
            if diameter < tol {
                let z = disk.center;
                let n = (z.norm_sqr() + 1.0).sqrt();
                return Ok(BoundaryVector { v: [z / n, Complex64::new(1.0 / n, 0.0)], z, layers_used: used, diameter });
            }
        }
    }
    Err(Error::NonConvergence { layers: used, diameter, tol })
}
