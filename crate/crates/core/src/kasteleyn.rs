//! Exact finite-torus computations: Kasteleyn determinants through the
//! Fourier block decomposition, inverse entries, covariances and a
//! brute-force matching oracle.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::disorder::{LayeredSample, Row};
use crate::matprod::{make_r_matrix, Mat2, ProductAccumulator};
use crate::numeric::{compensated_sum, log_2cosh, Scaled};
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Torus `(ℤ/2Lℤ) × (ℤ/2Nℤ)` with columns `1..=2L` and rows `-N+1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusSpec {
    l: usize,
    n: usize,
}

impl TorusSpec {
    pub fn new(l: usize, n: usize) -> Result<Self> {
        if l == 0 || l % 2 != 0 {
            return Err(Error::InvalidTorus(format!("L must be even and positive, got {l}")));
        }
        if n < 3 || n % 2 == 0 {
            return Err(Error::InvalidTorus(format!("N must be odd and at least 3, got {n}")));
        }
        Ok(Self { l, n })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> usize {
        4 * self.l * self.n
    }

    pub fn y_min(&self) -> i64 {
        -(self.n as i64) + 1
    }

    pub fn y_max(&self) -> i64 {
        self.n as i64
    }

    /// Column coordinate reduced to `1..=2L`.
    pub fn wrap_x(&self, x: i64) -> i64 {
        (x - 1).rem_euclid(2 * self.l as i64) + 1
    }

    /// Row coordinate reduced to `-N+1..=N`.
    pub fn wrap_y(&self, y: i64) -> i64 {
        (y - self.y_min()).rem_euclid(2 * self.n as i64) + self.y_min()
    }

    pub fn wrap(&self, v: Vertex) -> Vertex {
        Vertex::new(self.wrap_x(v.x), self.wrap_y(v.y))
    }

    /// Fourier indices `k ∈ {-L/2+1, …, L/2} − τ1/2`.
    pub fn fourier_indices(&self, tau1: u8) -> Vec<f64> {
        let h = (self.l / 2) as i64;
        (-h + 1..=h).map(|k| k as f64 - 0.5 * tau1 as f64).collect()
    }

    /// All vertices in the order used by the brute-force enumeration.
    pub fn vertex_list(&self) -> Vec<Vertex> {
        let mut v = Vec::with_capacity(self.vertices());
        for y in self.y_min()..=self.y_max() {
            for x in 1..=2 * self.l as i64 {
                v.push(Vertex { x, y });
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    pub x: i64,
    pub y: i64,
}

impl Vertex {
    pub fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn is_black(&self) -> bool {
        (self.x + self.y).rem_euclid(2) == 1
    }
}

/// A dimer position: one black and one white vertex, adjacent on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub black: Vertex,
    pub white: Vertex,
}

impl Edge {
    /// Orients an adjacent pair by color.
    pub fn between(a: Vertex, b: Vertex) -> Result<Self> {
        match (a.is_black(), b.is_black()) {
            (true, false) => Ok(Self { black: a, white: b }),
            (false, true) => Ok(Self { black: b, white: a }),
            _ => Err(Error::InvalidPair(format!("{a:?} and {b:?} have the same color"))),
        }
    }

    /// Horizontal edge with left endpoint `(x, y)`.
    pub fn horizontal(x: i64, y: i64) -> Result<Self> {
        Self::between(Vertex::new(x, y), Vertex::new(x + 1, y))
    }

    /// Vertical edge with bottom endpoint `(x, y)`.
    pub fn vertical(x: i64, y: i64) -> Result<Self> {
        Self::between(Vertex::new(x, y), Vertex::new(x, y + 1))
    }
}

/// Rows `(w1(y), w2(y))` for `y ∈ (-N, N]` together with the fields.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    torus: TorusSpec,
    rows: Vec<Row>,
    h1: f64,
    h2: f64,
}

pub fn build_weight_field(torus: TorusSpec, layers: &LayeredSample, h1: f64, h2: f64) -> Result<WeightField> {
    if !h1.is_finite() || !h2.is_finite() {
        return Err(Error::Precondition("fields must be finite".into()));
    }
    let rows = layers.slice(torus.y_min(), torus.y_max() + 1)?.to_vec();
    if rows.iter().any(|r| !(r.w1 > 0.0 && r.w2 > 0.0)) {
        return Err(Error::Precondition("weights must be positive".into()));
    }
    Ok(WeightField { torus, rows, h1, h2 })
}

impl WeightField {
    pub fn torus(&self) -> TorusSpec {
        self.torus
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn h2(&self) -> f64 {
        self.h2
    }

    pub fn with_fields(&self, h1: f64, h2: f64) -> Self {
        Self { h1, h2, ..self.clone() }
    }

    pub fn row(&self, y: i64) -> Row {
        let y = self.torus.wrap_y(y);
        self.rows[(y - self.torus.y_min()) as usize]
    }

    /// `K_τ(w, b)`; zero when the vertices are not neighbors.
    pub fn entry(&self, tau: (u8, u8), white: Vertex, black: Vertex) -> Complex64 {
        let t = &self.torus;
        let (x, y) = (t.wrap_x(white.x), t.wrap_y(white.y));
        let (xb, yb) = (t.wrap_x(black.x), t.wrap_y(black.y));
        let two_l = 2 * t.l as i64;
        let flip = |on: bool, bit: u8| if on && bit == 1 { -1.0 } else { 1.0 };
        let r = self.row(y);
        if yb == y {
            if xb == t.wrap_x(x - 1) {
                return Complex64::new(r.w1 * (-self.h2).exp() * flip(x == 1, tau.0), 0.0);
            }
            if xb == t.wrap_x(x + 1) {
                return Complex64::new(r.w1 * self.h2.exp() * flip(x == two_l, tau.0), 0.0);
            }
        } else if xb == x {
            if yb == t.wrap_y(y - 1) {
                return I * (self.row(y - 1).w2 * self.h1.exp() * flip(y == t.y_min(), tau.1));
            }
            if yb == t.wrap_y(y + 1) {
                return I * (r.w2 * (-self.h1).exp() * flip(y == t.y_max(), tau.1));
            }
        }
        Complex64::new(0.0, 0.0)
    }

    /// Edge weight `w(e) = |K(w, b)|`.
    pub fn edge_weight(&self, e: &Edge) -> f64 {
        self.entry((0, 0), e.white, e.black).norm()
    }

    fn r_matrix(&self, theta: f64, y: i64) -> Mat2 {
        let r = self.row(y);
        make_r_matrix(theta, -self.h2, r.w1, r.w2)
    }

    /// `R_a R_{a+1} ⋯ R_b` along the cyclic row order, as (matrix, log scale).
    /// `count` rows are taken starting at `a`.
    fn arc_product(&self, theta: f64, a: i64, count: usize) -> (Mat2, f64) {
        let mut acc = ProductAccumulator::new();
        for j in 0..count as i64 {
            acc.absorb(&self.r_matrix(theta, a + j));
        }
        (*acc.current(), acc.log_scale())
    }

    fn arc_entry11(&self, theta: f64, a: i64, count: usize) -> Scaled {
        if count == 0 {
            return Scaled::ONE;
        }
        let (m, log) = self.arc_product(theta, a, count);
        Scaled::new(m.a, log)
    }

    /// `Σ log w2(r)` over `count` rows starting at `a` (cyclic).
    fn log_w2_arc(&self, a: i64, count: usize) -> f64 {
        (0..count as i64).map(|j| self.row(a + j).w2.ln()).sum()
    }
}

/// Determinant of the tridiagonal block on rows `y_from..=y_to` at angle θ,
/// via the two-term recursion. An empty range gives 1.
pub fn tridiagonal_minor(theta: f64, y_from: i64, y_to: i64, wf: &WeightField) -> Result<Complex64> {
    tridiagonal_minor_scaled(theta, y_from, y_to, wf).map(Scaled::to_complex)
}

pub fn tridiagonal_minor_scaled(theta: f64, y_from: i64, y_to: i64, wf: &WeightField) -> Result<Scaled> {
    let t = wf.torus;
    if y_from < t.y_min() || y_to > t.y_max() || y_from > y_to + 1 {
        return Err(Error::RowOutOfRange { y: y_from, lo: t.y_min(), hi: t.y_max() + 1 });
    }
    Ok(wf.arc_entry11(theta, y_from, (y_to + 1 - y_from) as usize))
}

/// One Fourier block of `det K_τ`: `trace_term + (−1)^{τ2} sign_term`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockFactor {
    pub k: f64,
    pub trace_term: Scaled,
    /// `2 cosh(2N H1) ∏ w2`, positive.
    pub sign_term: Scaled,
}

impl BlockFactor {
    pub fn det(&self, tau2: u8) -> Scaled {
        let s = if tau2 == 1 { self.sign_term.neg() } else { self.sign_term };
        self.trace_term.add(s)
    }

    /// Digits lost in the block sum.
    pub fn digits_lost(&self, tau2: u8) -> f64 {
        let top = self.trace_term.log_abs().max(self.sign_term.log_abs());
        ((top - self.det(tau2).log_abs()) / std::f64::consts::LN_10).max(0.0)
    }
}

pub fn block_factors(wf: &WeightField, tau1: u8) -> Vec<BlockFactor> {
    let t = wf.torus;
    let n2 = 2 * t.n;
    let sign_log = log_2cosh(2.0 * t.n as f64 * wf.h1) + wf.log_w2_arc(t.y_min(), n2);
    t.fourier_indices(tau1)
        .into_iter()
        .map(|k| {
            let theta = std::f64::consts::PI * k / t.l as f64;
            let (m, log) = wf.arc_product(theta, t.y_min(), n2);
            BlockFactor { k, trace_term: Scaled::new(m.trace(), log), sign_term: Scaled::from_log(sign_log) }
        })
        .collect()
}

/// `det K_τ` as the product of its Fourier blocks, with the worst block loss.
pub fn det_kasteleyn(wf: &WeightField, tau: (u8, u8)) -> Result<(Scaled, f64)> {
    let mut det = Scaled::ONE;
    let mut lost = 0.0f64;
    for b in block_factors(wf, tau.0) {
        let d = b.det(tau.1);
        if d.is_zero() {
            return Ok((Scaled::ZERO, lost));
        }
        lost = lost.max(b.digits_lost(tau.1));
        det = det.mul(d);
    }
    Ok((det, lost))
}

/// `c(τ)` indexed by `2τ1 + τ2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignVector {
    c: [i8; 4],
}

pub const TAUS: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

impl SignVector {
    /// Pattern with all signs `sign` except `−sign` at `odd`.
    pub fn with_odd(odd: (u8, u8), sign: i8) -> Self {
        let mut c = [sign; 4];
        c[(2 * odd.0 + odd.1) as usize] = -sign;
        Self { c }
    }

    pub fn get(&self, tau: (u8, u8)) -> f64 {
        self.c[(2 * tau.0 + tau.1) as usize] as f64
    }

    pub fn values(&self) -> [i8; 4] {
        self.c
    }

    fn candidates() -> impl Iterator<Item = SignVector> {
        TAUS.into_iter().flat_map(|t| [1i8, -1].map(|s| SignVector::with_odd(t, s)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionFunction {
    /// `log Z`.
    pub log: f64,
    /// `c(τ) det K_τ`, in [`TAUS`] order.
    pub terms: [Scaled; 4],
    /// Digits lost combining the four terms or inside a block.
    pub digits_lost: f64,
    /// More than 6 digits lost somewhere.
    pub cancellation: bool,
}

impl PartitionFunction {
    /// `⟨⟨·⟩⟩` weight `c(τ) det K_τ / 2Z` of each τ.
    pub fn tau_weights(&self) -> [Complex64; 4] {
        let z2 = Scaled::from_log(self.log + std::f64::consts::LN_2);
        self.terms.map(|t| t.div(z2).to_complex())
    }
}

fn combine(wf: &WeightField, signs: SignVector) -> Result<PartitionFunction> {
    let mut terms = [Scaled::ZERO; 4];
    let mut lost = 0.0f64;
    for (i, tau) in TAUS.into_iter().enumerate() {
        let (d, l) = det_kasteleyn(wf, tau)?;
        terms[i] = if signs.get(tau) < 0.0 { d.neg() } else { d };
        lost = lost.max(l);
    }
    let (sum, ratio) = compensated_sum(&terms);
    let z = sum.mant;
    if !(z.re > 0.0) || z.im.abs() > 1e-8 * z.re.abs() {
        return Err(Error::SignCalibration);
    }
    lost = lost.max(-ratio.log10());
    Ok(PartitionFunction { log: sum.log_abs() - std::f64::consts::LN_2, terms, digits_lost: lost, cancellation: lost > 6.0 })
}

/// `Z = ½ Σ c(τ) det K_τ` from the Fourier blocks, with the cached signs.
pub fn partition_function_blocks(wf: &WeightField) -> Result<PartitionFunction> {
    combine(wf, calibrated_signs()?)
}

/// `(1/4LN) log Z`.
pub fn finite_free_energy_density(wf: &WeightField) -> Result<f64> {
    Ok(partition_function_blocks(wf)?.log / wf.torus.vertices() as f64)
}

/// Largest torus handled by the exhaustive enumeration.
pub const BRUTE_FORCE_LIMIT: usize = 36;

struct Graph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    fn new(wf: &WeightField) -> Result<(Self, Vec<Vertex>)> {
        let t = wf.torus;
        if t.vertices() > BRUTE_FORCE_LIMIT {
            return Err(Error::TooLarge { vertices: t.vertices(), limit: BRUTE_FORCE_LIMIT });
        }
        let verts = t.vertex_list();
        let index = |v: Vertex| -> usize {
            let (x, y) = (t.wrap_x(v.x), t.wrap_y(v.y));
            ((y - t.y_min()) * 2 * t.l as i64 + x - 1) as usize
        };
        let mut adj = vec![Vec::new(); verts.len()];
        for &v in &verts {
            for (dx, dy) in [(1, 0), (0, 1)] {
                let u = Vertex::new(t.wrap_x(v.x + dx), t.wrap_y(v.y + dy));
                let e = Edge::between(v, u)?;
                let w = wf.edge_weight(&e);
                adj[index(v)].push((index(u), w));
                adj[index(u)].push((index(v), w));
            }
        }
        Ok((Self { adj }, verts))
    }

    fn count(&self, used: u64) -> f64 {
        let full = (1u64 << self.adj.len()) - 1;
        if used == full {
            return 1.0;
        }
        let v = (!used).trailing_zeros() as usize;
        let mut total = 0.0;
        for &(u, w) in &self.adj[v] {
            if used & (1 << u) == 0 {
                total += w * self.count(used | (1 << v) | (1 << u));
            }
        }
        total
    }
}

/// Weighted perfect-matching count by lowest-free-vertex branching.
pub fn brute_force_partition(wf: &WeightField) -> Result<f64> {
    let (g, _) = Graph::new(wf)?;
    Ok(g.count(0))
}

/// Probability that all `edges` are occupied, by enumeration.
pub fn brute_force_edge_probability(wf: &WeightField, edges: &[Edge]) -> Result<f64> {
    let (g, verts) = Graph::new(wf)?;
    let t = wf.torus;
    let mut used = 0u64;
    let mut weight = 1.0;
    for e in edges {
        for v in [e.black, e.white] {
            let v = Vertex::new(t.wrap_x(v.x), t.wrap_y(v.y));
            let i = verts.iter().position(|&u| u == v).ok_or_else(|| Error::InvalidPair(format!("{v:?} not on the torus")))?;
            if used & (1 << i) != 0 {
                return Ok(0.0);
            }
            used |= 1 << i;
        }
        let w = wf.edge_weight(e);
        if w == 0.0 {
            return Err(Error::InvalidPair(format!("{e:?} is not an edge")));
        }
        weight *= w;
    }
    Ok(weight * g.count(used) / g.count(0))
}

/// Finds the sign pattern reproducing the enumeration on random weight
/// fields (three per size, at several field values) for each reference size.
pub fn calibrate_signs(reference_sizes: &[(usize, usize)]) -> Result<SignVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut cases = Vec::new();
    for &(l, n) in reference_sizes {
        let t = TorusSpec::new(l, n)?;
        for _ in 0..3 {
            let rows = (0..2 * n).map(|_| Row { w1: rng.random_range(0.5..2.0), w2: rng.random_range(0.5..2.0) }).collect();
            let layers = LayeredSample::from_rows(t.y_min(), rows)?;
            for (h1, h2) in [(0.0, 0.0), (0.3, -0.2), (-0.7, 0.5)] {
                let wf = build_weight_field(t, &layers, h1, h2)?;
                let z = brute_force_partition(&wf)?;
                cases.push((wf, z));
            }
        }
    }
    if cases.is_empty() {
        return Err(Error::Precondition("no reference sizes".into()));
    }
    let mut found = None;
    for s in SignVector::candidates() {
        let ok = cases.iter().all(|(wf, z)| match combine(wf, s) {
            Ok(p) => ((p.log - z.ln()).abs()) < 1e-9,
            Err(_) => false,
        });
        if ok {
            if found.is_some() {
                return Err(Error::SignCalibration);
            }
            found = Some(s);
        }
    }
    found.ok_or(Error::SignCalibration)
}

/// Sign pattern calibrated once on the 4×6 torus.
pub fn calibrated_signs() -> Result<SignVector> {
    static SIGNS: OnceLock<Result<SignVector>> = OnceLock::new();
    SIGNS.get_or_init(|| calibrate_signs(&[(2, 3)])).clone()
}

/// Blocks losing more digits than this to cancellation count as singular.
pub const SINGULAR_DIGITS: f64 = 12.0;

/// Entry `(K_θ^{τ2})⁻¹[yb, yw]` of the inverse Fourier block (rows black,
/// columns white), from the cofactor expansion.
pub fn inverse_block_entry(wf: &WeightField, theta: f64, tau2: u8, yb: i64, yw: i64) -> Result<Complex64> {
    let block = BlockFactor::det_at(wf, theta)?;
    let det = block.det(tau2);
    if det.is_zero() || block.digits_lost(tau2) > SINGULAR_DIGITS {
        return Err(Error::SingularBlock(block.k));
    }
    Ok(block_cofactor(wf, theta, tau2, yb, yw).div(det).to_complex())
}

impl BlockFactor {
    fn det_at(wf: &WeightField, theta: f64) -> Result<BlockFactor> {
        let t = wf.torus;
        let n2 = 2 * t.n;
        let sign_log = log_2cosh(2.0 * t.n as f64 * wf.h1) + wf.log_w2_arc(t.y_min(), n2);
        let (m, log) = wf.arc_product(theta, t.y_min(), n2);
        Ok(BlockFactor { k: theta * t.l as f64 / std::f64::consts::PI, trace_term: Scaled::new(m.trace(), log), sign_term: Scaled::from_log(sign_log) })
    }
}

/// `∂ det K_θ / ∂ K_θ[yw, yb]`.
fn block_cofactor(wf: &WeightField, theta: f64, tau2: u8, yb: i64, yw: i64) -> Scaled {
    let t = wf.torus;
    let n2 = 2 * t.n as i64;
    let (yb, yw) = (t.wrap_y(yb), t.wrap_y(yw));
    // complement arc, running upward from just above the upper index
    let comp = |hi: i64, lo: i64| wf.arc_entry11(theta, hi + 1, (n2 - (hi - lo) - 1) as usize);
    if yb == yw {
        return comp(yb, yb);
    }
    let tau_sign = if tau2 == 1 { -1.0 } else { 1.0 };
    let (lo, hi) = (yb.min(yw), yb.max(yw));
    let d = (hi - lo) as i32;
    // cycle along the short side, rows lo..hi-1 (w2 indices), fields sign s
    let s = if yb < yw { -wf.h1 } else { wf.h1 };
    let short = comp(hi, lo).mul(Scaled::from_log(wf.log_w2_arc(lo, d as usize) + s * d as f64)).scale_c(I.powi(-d));
    // cycle around the torus, w2 indices hi..lo-1 (cyclic), opposite field sign
    let m = (n2 - d as i64) as usize;
    let inner = wf.arc_entry11(theta, lo + 1, (d - 1) as usize);
    let long = inner.mul(Scaled::from_log(wf.log_w2_arc(hi, m) - s * m as f64)).scale_c(I.powi(d) * (-tau_sign));
    short.add(long)
}

/// Matrix element `K_τ⁻¹(b, w)` by Fourier summation of block inverses.
pub fn inverse_kasteleyn_entry(wf: &WeightField, tau: (u8, u8), black: Vertex, white: Vertex) -> Result<Complex64> {
    if !black.is_black() || white.is_black() {
        return Err(Error::InvalidPair(format!("expected black {black:?} and white {white:?}")));
    }
    let t = wf.torus;
    let (black, white) = (t.wrap(black), t.wrap(white));
    let mut sum = Complex64::new(0.0, 0.0);
    for k in t.fourier_indices(tau.0) {
        let theta = std::f64::consts::PI * k / t.l as f64;
        let phase = Complex64::from_polar(1.0, theta * (black.x - white.x) as f64);
        sum += phase * inverse_block_entry(wf, theta, tau.1, black.y, white.y)?;
    }
    Ok(sum / t.l as f64)
}

/// Joint occupation probability of `edges` from the four Kasteleyn inverses.
pub fn finite_edge_probability(wf: &WeightField, edges: &[Edge]) -> Result<f64> {
    let z = partition_function_blocks(wf)?;
    edge_probability_with(wf, &z, edges)
}

fn edge_probability_with(wf: &WeightField, z: &PartitionFunction, edges: &[Edge]) -> Result<f64> {
    let weights = z.tau_weights();
    let mut total = Complex64::new(0.0, 0.0);
    for (i, tau) in TAUS.into_iter().enumerate() {
        let mut prod = Complex64::new(1.0, 0.0);
        for e in edges {
            let k = wf.entry(tau, e.white, e.black);
            if k == Complex64::new(0.0, 0.0) {
                return Err(Error::InvalidPair(format!("{e:?} is not an edge")));
            }
            prod *= k;
        }
        let n = edges.len();
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for (a, ea) in edges.iter().enumerate() {
            for (b, eb) in edges.iter().enumerate() {
                m[a * n + b] = inverse_kasteleyn_entry(wf, tau, ea.black, eb.white)?;
            }
        }
        total += weights[i] * prod * small_det(&mut m, n);
    }
    Ok(total.re)
}

/// Determinant by Gaussian elimination with partial pivoting.
fn small_det(m: &mut [Complex64], n: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a * n + c].norm().total_cmp(&m[b * n + c].norm())).unwrap();
        if m[p * n + c] == Complex64::new(0.0, 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        if p != c {
            for j in 0..n {
                m.swap(p * n + j, c * n + j);
            }
            det = -det;
        }
        let piv = m[c * n + c];
        det *= piv;
        for r in c + 1..n {
            let f = m[r * n + c] / piv;
            for j in c..n {
                let v = m[c * n + j];
                m[r * n + j] -= f * v;
            }
        }
    }
    det
}

/// Exact finite-volume `Cov(e, e′) = P(e, e′) − P(e) P(e′)`.
pub fn finite_covariance(wf: &WeightField, e: &Edge, e2: &Edge) -> Result<f64> {
    if e == e2 {
        return Err(Error::InvalidPair("use the edge probability for e = e′".into()));
    }
    let z = partition_function_blocks(wf)?;
    let joint = edge_probability_with(wf, &z, &[*e, *e2])?;
    let p1 = edge_probability_with(wf, &z, &[*e])?;
    let p2 = edge_probability_with(wf, &z, &[*e2])?;
    Ok(joint - p1 * p2)
}
