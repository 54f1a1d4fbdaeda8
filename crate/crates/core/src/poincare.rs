//! Hyperbolic geometry of the right half-plane `ℍ = {Re z > 0}` and the
//! Möbius action of 2×2 complex matrices on it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlanePoint(Complex64);

impl HalfPlanePoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if z.re > 0.0 && z.im.is_finite() && z.re.is_finite() {
            Ok(Self(z))
        } else {
            Err(Error::NotInHalfPlane(format!("{z}")))
        }
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }
}

/// `d(z1, z2) = 2 artanh(|z1 − z2| / |z1 + conj(z2)|)`.
pub fn hyperbolic_distance(z1: HalfPlanePoint, z2: HalfPlanePoint) -> f64 {
    let (a, b) = (z1.0, z2.0);
    let r = (a - b).norm() / (a + b.conj()).norm();
    2.0 * r.min(1.0).atanh()
}

/// Point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ext {
    Finite(Complex64),
    Infinity,
}

impl Ext {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            Ext::Finite(z) => Some(z),
            Ext::Infinity => None,
        }
    }
}

/// `T z = (a z + b) / (c z + d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Homography {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        if a * d - b * c == Complex64::new(0.0, 0.0) {
            return Err(Error::Precondition("homography matrix is singular".into()));
        }
        Ok(Self { a, b, c, d })
    }

    /// The matrix `[[ω, α], [1, 0]]`, acting as `z ↦ ω + α/z`.
    pub fn m_form(omega: Complex64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Precondition("alpha must be positive".into()));
        }
        Self::new(omega, Complex64::new(alpha, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, z: Ext) -> Ext {
        match z {
            Ext::Infinity => {
                if self.c == Complex64::new(0.0, 0.0) {
                    Ext::Infinity
                } else {
                    Ext::Finite(self.a / self.c)
                }
            }
            Ext::Finite(z) => {
                let den = self.c * z + self.d;
                if den == Complex64::new(0.0, 0.0) {
                    Ext::Infinity
                } else {
                    Ext::Finite((self.a * z + self.b) / den)
                }
            }
        }
    }

    /// Matrix product, i.e. the composition `self ∘ other`.
    pub fn compose(&self, o: &Homography) -> Homography {
        Homography {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// `(ω, α)` if the matrix is a multiple of `[[ω, α], [1, 0]]`
    /// with `α > 0` and `Re ω ≥ 0`.
    pub fn as_m_form(&self) -> Option<(Complex64, f64)> {
        if self.d != Complex64::new(0.0, 0.0) || self.c == Complex64::new(0.0, 0.0) {
            return None;
        }
        let omega = self.a / self.c;
        let alpha = self.b / self.c;
        let tol = 1e-12 * alpha.norm();
        if alpha.re > 0.0 && alpha.im.abs() <= tol && omega.re >= 0.0 {
            Some((omega, alpha.re))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicDisk {
    pub center: Complex64,
    pub radius: f64,
}

impl HyperbolicDisk {
    pub fn new(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || radius > center.re {
            return Err(Error::Precondition(format!("disk ({center}, {radius}) not inside the closed half-plane")));
        }
        Ok(Self { center, radius })
    }

    /// Hyperbolic diameter `2 artanh(R / Re c)`.
    pub fn diameter(&self) -> f64 {
        disk_diameter(self.radius, self.center.re)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() <= self.radius
    }
}

fn disk_diameter(radius: f64, re_center: f64) -> f64 {
    let r = radius / re_center;
    if r >= 1.0 {
        f64::INFINITY
    } else {
        2.0 * r.atanh()
    }
}

/// A disk, or a half-plane `{Re z > re_min}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    HalfPlane { re_min: f64 },
    Disk(HyperbolicDisk),
}

impl Region {
    pub fn diameter(&self) -> f64 {
        match self {
            Region::HalfPlane { .. } => f64::INFINITY,
            Region::Disk(d) => d.diameter(),
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            Region::HalfPlane { re_min } => z.re > *re_min,
            Region::Disk(d) => d.contains(z),
        }
    }
}

/// Image of a region under `z ↦ ω + α/z`.
fn image_m_form(region: Region, omega: Complex64, alpha: f64) -> Result<Region> {
    match region {
        Region::HalfPlane { re_min } if re_min == 0.0 => Ok(Region::HalfPlane { re_min: omega.re }),
        Region::HalfPlane { re_min } if re_min > 0.0 => {
            let r = alpha / (2.0 * re_min);
            Ok(Region::Disk(HyperbolicDisk { center: omega + r, radius: r }))
        }
        Region::HalfPlane { .. } => Err(Error::Precondition("region contains the pole".into())),
        Region::Disk(dk) => {
            let q = dk.center.norm_sqr() - dk.radius * dk.radius;
            if !(q > 0.0) {
                return Err(Error::Precondition("disk contains the pole".into()));
            }
            Ok(Region::Disk(HyperbolicDisk { center: omega + dk.center.conj() * (alpha / q), radius: alpha * dk.radius / q }))
        }
    }
}

/// Image of `ℍ` under `T_1 ∘ … ∘ T_n`, each `T_i` of the form `M(ω, α)`.
pub fn image_of_halfplane(ms: &[Homography]) -> Result<Region> {
    if ms.is_empty() {
        return Err(Error::Precondition("empty homography sequence".into()));
    }
    let mut region = Region::HalfPlane { re_min: 0.0 };
    for m in ms.iter().rev() {
        let (omega, alpha) = m.as_m_form().ok_or_else(|| Error::Precondition("matrix is not of the form M(ω, α)".into()))?;
        region = image_m_form(region, omega, alpha)?;
    }
    Ok(region)
}

/// Image of `ℍ` under a single general homography whose pole lies in
/// `Re z < 0`. `abs_det`, when known exactly (e.g. from accumulated logs),
/// replaces the cancellation-prone `|ad − bc|`.
pub fn image_of_halfplane_single(h: &Homography, abs_det: Option<f64>) -> Result<Region> {
    let zero = Complex64::new(0.0, 0.0);
    let det = abs_det.unwrap_or_else(|| h.det().norm());
    if h.c == zero {
        let s = h.a / h.d;
        if s.re > 0.0 && s.im.abs() <= 1e-14 * s.re {
            return Ok(Region::HalfPlane { re_min: (h.b / h.d).re });
        }
        return Err(Error::Precondition("affine image is not a vertical half-plane".into()));
    }
    let q = 2.0 * (h.c * h.d.conj()).re;
    if !(q > 0.0) {
        if h.d == zero || q == 0.0 {
            let omega = h.a / h.c;
            return Ok(Region::HalfPlane { re_min: omega.re });
        }
        return Err(Error::Precondition("pole inside the half-plane".into()));
    }
    let center = (h.a * h.d.conj() + h.b * h.c.conj()) / q;
    Ok(Region::Disk(HyperbolicDisk { center, radius: det / q }))
}

/// Upper bound `(1 + 2 Re ω1 Re ω2 / α1)^{-1}` on the contraction rate of
/// `T1 ∘ T2` in the hyperbolic metric.
pub fn contraction_bound_pair(m1: &Homography, m2: &Homography) -> Result<f64> {
    let (o1, a1) = m1.as_m_form().ok_or_else(|| Error::Precondition("first matrix is not of the form M(ω, α)".into()))?;
    let (o2, _) = m2.as_m_form().ok_or_else(|| Error::Precondition("second matrix is not of the form M(ω, α)".into()))?;
    if !(o1.re > 0.0 && o2.re > 0.0) {
        return Err(Error::Precondition("Re ω must be positive".into()));
    }
    Ok(1.0 / (1.0 + 2.0 * o1.re * o2.re / a1))
}

/// Contraction rate bound for a holomorphic self-map of `ℍ` whose image has
/// hyperbolic diameter `d`.
pub fn contraction_from_diameter(d: f64) -> f64 {
    (0.5 * d).tanh()
}

/// One randomized property check: the worst violation over `samples` trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub samples: usize,
    /// Largest excess over the bound (≤ 0 when the bound always held).
    pub max_violation: f64,
    pub tolerance: f64,
}

impl PropertyCheck {
    pub fn passed(&self) -> bool {
        self.max_violation <= self.tolerance
    }
}

fn random_m(rng: &mut impl Rng) -> Homography {
    let omega = Complex64::new(rng.random_range(0.2..2.0), rng.random_range(-1.0..1.0));
    Homography::m_form(omega, rng.random_range(0.5..2.0)).expect("α > 0")
}

fn random_point(rng: &mut impl Rng) -> HalfPlanePoint {
    HalfPlanePoint::new(Complex64::new(rng.random_range(0.1..5.0), rng.random_range(-3.0..3.0))).expect("Re > 0")
}

fn map_point(h: &Homography, z: HalfPlanePoint) -> HalfPlanePoint {
    HalfPlanePoint::new(h.apply(Ext::Finite(z.value())).finite().expect("finite image")).expect("image stays in ℍ")
}

fn compose_all(ms: &[Homography]) -> Homography {
    ms.iter().skip(1).fold(ms[0], |acc, m| acc.compose(m))
}

/// Randomized checks of Schwarz–Pick, the pair contraction bound, the
/// diameter contraction bound, the disk-diameter formula, trace
/// comparability and diameter decay of long products.
pub fn property_suite(samples: usize, seed: u64) -> Vec<PropertyCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = f64::NEG_INFINITY;
    let mut pair = f64::NEG_INFINITY;
    let mut diam = f64::NEG_INFINITY;
    let mut disk = f64::NEG_INFINITY;
    let mut trace = f64::INFINITY;
    for _ in 0..samples {
        let n = rng.random_range(1..=6);
        let ms: Vec<Homography> = (0..n).map(|_| random_m(&mut rng)).collect();
        let t = compose_all(&ms);
        let (z1, z2) = (random_point(&mut rng), random_point(&mut rng));
        let d0 = hyperbolic_distance(z1, z2);
        let d1 = hyperbolic_distance(map_point(&t, z1), map_point(&t, z2));
        pick = pick.max(d1 - d0);
        if n >= 2 {
            let bound = contraction_bound_pair(&ms[0], &ms[1]).expect("M-form pair");
            let t2 = ms[0].compose(&ms[1]);
            pair = pair.max(hyperbolic_distance(map_point(&t2, z1), map_point(&t2, z2)) - bound * d0);
            if let Ok(Region::Disk(dk)) = image_of_halfplane(&ms) {
                let rate = contraction_from_diameter(dk.diameter());
                diam = diam.max(d1 - rate * d0);
                if dk.radius < (1.0 - 1e-9) * dk.center.re {
                    let p = HalfPlanePoint::new(dk.center - dk.radius).expect("inside ℍ");
                    let q = HalfPlanePoint::new(dk.center + dk.radius).expect("inside ℍ");
                    disk = disk.max((hyperbolic_distance(p, q) - dk.diameter()).abs() / dk.diameter().max(1.0));
                }
            }
        }
        let len = rng.random_range(2..=40);
        let prod = compose_all(&(0..len).map(|_| random_m(&mut rng)).collect::<Vec<_>>());
        let l1 = prod.a.norm() + prod.b.norm() + prod.c.norm() + prod.d.norm();
        trace = trace.min((prod.a + prod.d).norm() / l1);
    }
    let decay = diameter_decay_violation(&mut rng, samples.clamp(1, 100));
    let check = |name, max_violation, tolerance| PropertyCheck { name, samples, max_violation, tolerance };
    vec![
        check("schwarz-pick", pick, 1e-12),
        check("pair-contraction-bound", pair, 1e-12),
        check("diameter-contraction-bound", diam, 1e-12),
        check("disk-diameter", disk, 1e-12),
        // comparability constant: |Tr| / ‖·‖₁ must stay above 10⁻²
        check("trace-comparability", 1e-2 - trace, 0.0),
        check("diameter-decay", decay, 1e-6),
    ]
}

/// Diameters of `T_1 ∘ … ∘ T_n(ℍ)`, `n = 2..40`, must not increase, and
/// `log diam` must fall linearly (slope < 0, r² ≥ 0.9). Returns the worst
/// relative increase, or `+∞` if a fit fails.
fn diameter_decay_violation(rng: &mut impl Rng, runs: usize) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..runs {
        let ms: Vec<Homography> = (0..40).map(|_| random_m(rng)).collect();
        let d: Vec<f64> = (2..=40).map(|n| image_of_halfplane(&ms[..n]).map(|r| r.diameter()).unwrap_or(f64::INFINITY)).collect();
        for w in d.windows(2) {
            worst = worst.max((w[1] - w[0]) / w[0]);
        }
        let x: Vec<f64> = (2..=40).map(|n| n as f64).collect();
        let y: Vec<f64> = d.iter().map(|v| v.ln()).collect();
        match crate::numeric::linear_fit(&x[8..], &y[8..]) {
            Ok(f) if f.slope < 0.0 && f.r_squared >= 0.9 => {}
            _ => return f64::INFINITY,
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(re: f64, im: f64) -> HalfPlanePoint {
        HalfPlanePoint::new(Complex64::new(re, im)).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(hyperbolic_distance(p(1.0, 0.0), p(1.0, 0.0)), 0.0);
        assert_relative_eq!(hyperbolic_distance(p(1.0, 0.0), p(2.0, 0.0)), 2f64.ln(), epsilon = 1e-15);
        let d = HyperbolicDisk::new(Complex64::new(2.0, 0.0), 1.0).unwrap();
        assert_relative_eq!(d.diameter(), 3f64.ln(), epsilon = 1e-15);
        assert!(HalfPlanePoint::new(Complex64::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn m_form_action() {
        let w = Complex64::new(0.3, -0.2);
        let m = Homography::m_form(w, 2.0).unwrap();
        let z = Complex64::new(1.5, 0.7);
        assert_relative_eq!((m.apply(Ext::Finite(z)).finite().unwrap() - (w + 2.0 / z)).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(m.apply(Ext::Finite(Complex64::new(0.0, 0.0))), Ext::Infinity);
        let id = Homography::new(1.0.into(), 0.0.into(), 0.0.into(), 1.0.into()).unwrap();
        assert_eq!(id.apply(Ext::Finite(z)), Ext::Finite(z));
    }

    #[test]
    fn halfplane_images() {
        let m = Homography::m_form(Complex64::new(1.0, 0.0), 1.0).unwrap();
        assert_eq!(image_of_halfplane(&[m]).unwrap(), Region::HalfPlane { re_min: 1.0 });
        match image_of_halfplane(&[m, m]).unwrap() {
            Region::Disk(d) => {
                assert_relative_eq!(d.center.re, 1.5);
                assert_relative_eq!(d.radius, 0.5);
            }
            r => panic!("expected a disk, got {r:?}"),
        }
        assert_relative_eq!(contraction_bound_pair(&m, &m).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn single_image_agrees_with_tracking() {
        let ms: Vec<Homography> = (0..6)
            .map(|i| Homography::m_form(Complex64::new(0.4 + 0.1 * i as f64, 0.3 - 0.1 * i as f64), 0.5 + 0.2 * i as f64).unwrap())
            .collect();
        let tracked = image_of_halfplane(&ms).unwrap();
        let prod = ms.iter().skip(1).fold(ms[0], |acc, m| acc.compose(m));
        let single = image_of_halfplane_single(&prod, None).unwrap();
        match (tracked, single) {
            (Region::Disk(a), Region::Disk(b)) => {
                assert_relative_eq!((a.center - b.center).norm(), 0.0, epsilon = 1e-12);
                assert_relative_eq!(a.radius, b.radius, max_relative = 1e-10);
            }
            other => panic!("{other:?}"),
        }
    }
}
