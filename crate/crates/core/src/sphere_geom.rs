//! Exact geometric primitives on the unit sphere and the open unit ball.
//!
//! Everything here is a pure function of immutable values. Sphere-valued
//! results are renormalized to unit length after every map so that long
//! compositions do not drift off the sphere.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted deviation from unit length when wrapping an existing vector.
pub const UNIT_TOLERANCE: f64 = 1e-10;

/// Points of the ball must satisfy `|x| < 1 - BALL_MARGIN`.
pub const BALL_MARGIN: f64 = 1e-14;

/// Largest cap parameter used by search loops; the `t -> 1` limit is studied
/// separately in [`crate::degen_limits`].
pub const CAP_T_MAX: f64 = 1.0 - 1e-6;

/// Slack for the inclusive cap membership test.
pub const CAP_BOUNDARY_SLACK: f64 = 1e-14;

const DENOMINATOR_FLOOR: f64 = 1e-300;

/// A point on the unit sphere `S^{m-1}` in `R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitVector(DVector<f64>);

impl UnitVector {
    /// Wraps `coords`, which must already have unit length up to
    /// [`UNIT_TOLERANCE`]; the stored copy is renormalized exactly.
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Domain(format!(
                "expected a unit vector, got norm {norm}"
            )));
        }
        Ok(Self(coords / norm))
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn from_direction(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Domain(format!(
                "cannot normalize a vector of norm {norm}"
            )));
        }
        Ok(Self(coords / norm))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    /// The `i`-th standard basis vector of `R^m`.
    pub fn basis(m: usize, i: usize) -> Self {
        let mut v = DVector::zeros(m);
        v[i] = 1.0;
        Self(v)
    }

    /// A uniformly distributed point on `S^{m-1}`.
    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        loop {
            let v = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            if let Ok(u) = Self::from_direction(v) {
                return u;
            }
        }
    }

    pub(crate) fn renormalized(coords: DVector<f64>) -> Self {
        let norm = coords.norm();
        Self(coords / norm)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn neg(&self) -> Self {
        Self(-&self.0)
    }
}

/// A point of the open unit ball `B^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallPoint(DVector<f64>);

impl BallPoint {
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() || norm >= 1.0 - BALL_MARGIN {
            return Err(Error::Domain(format!(
                "ball point must satisfy |x| < 1, got |x| = {norm}"
            )));
        }
        Ok(Self(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn origin(m: usize) -> Self {
        Self(DVector::zeros(m))
    }

    /// The point `r * dir` for `0 <= r < 1`.
    pub fn along(dir: &UnitVector, r: f64) -> Result<Self> {
        Self::new(dir.coords() * r)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn neg(&self) -> Self {
        Self(-&self.0)
    }
}

/// Evaluates `T_x(y)` for an arbitrary `y` in the closed ball.
///
/// `T_x(y) = ((1 + 2 x.y + |y|^2) x + (1 - |x|^2) y) / (1 + 2 x.y + |x|^2 |y|^2)`
pub fn moebius_raw(x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let xy = x.dot(y);
    let xx = x.norm_squared();
    let yy = y.norm_squared();
    let den = 1.0 + 2.0 * xy + xx * yy;
    if den.abs() < DENOMINATOR_FLOOR {
        return Err(Error::Domain(format!(
            "Mobius denominator vanishes (|x| = {}, x.y = {xy})",
            xx.sqrt()
        )));
    }
    Ok((x * (1.0 + 2.0 * xy + yy) + y * (1.0 - xx)) / den)
}

/// Points that a Mobius transformation of the ball can act on.
pub trait MoebiusImage: Sized {
    fn moebius_image(&self, x: &BallPoint) -> Result<Self>;
}

impl MoebiusImage for UnitVector {
    fn moebius_image(&self, x: &BallPoint) -> Result<Self> {
        moebius_raw(x.coords(), self.coords()).map(UnitVector::renormalized)
    }
}

impl MoebiusImage for BallPoint {
    fn moebius_image(&self, x: &BallPoint) -> Result<Self> {
        let v = moebius_raw(x.coords(), self.coords())?;
        // The open ball is invariant; clamp rounding right at the boundary.
        let norm = v.norm();
        if norm >= 1.0 - BALL_MARGIN {
            return Ok(Self(v * ((1.0 - 2.0 * BALL_MARGIN) / norm)));
        }
        Ok(Self(v))
    }
}

/// `T_x(y)`, returning a point of the same kind as `y`.
pub fn moebius_apply<P: MoebiusImage>(x: &BallPoint, y: &P) -> Result<P> {
    y.moebius_image(x)
}

/// Linear stretch factor of `T_x` restricted to the sphere at `y`:
/// `(1 - |x|^2) / (1 + 2 x.y + |x|^2)`, evaluated as `(1 - |x|^2) / |x + y|^2`
/// to avoid cancellation near `y = -x/|x|`.
pub fn moebius_conformal_factor(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (1.0 - x.norm_squared()) / (x + y).norm_squared()
}

/// Reflection in the hyperplane through the origin orthogonal to `b`.
pub fn reflect_hyperplane(b: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let bb = b.norm_squared();
    if !(bb > 0.0) || !bb.is_finite() {
        return Err(Error::Domain("reflection vector must be nonzero".into()));
    }
    Ok(y - b * (2.0 * y.dot(b) / bb))
}

/// The spherical cap `H_{p,t} = T_{pt}(H_p) = { y : y.p <= 2t / (1 + t^2) }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalCap {
    p: UnitVector,
    t: f64,
}

impl SphericalCap {
    pub fn new(p: UnitVector, t: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::Domain(format!("cap parameter t must lie in [0, 1), got {t}")));
        }
        Ok(Self { p, t })
    }

    /// Same as [`SphericalCap::new`] but clamps `t` into `[0, CAP_T_MAX]`.
    pub fn clamped(p: UnitVector, t: f64) -> Self {
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, CAP_T_MAX) };
        Self { p, t }
    }

    pub fn p(&self) -> &UnitVector {
        &self.p
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    /// Height of the boundary circle along `p`.
    pub fn threshold(&self) -> f64 {
        2.0 * self.t / (1.0 + self.t * self.t)
    }

    /// Signed distance-like quantity `y.p - threshold`; nonpositive inside.
    pub fn level(&self, y: &DVector<f64>) -> f64 {
        y.dot(self.p.coords()) - self.threshold()
    }

    /// Inclusive membership test.
    pub fn contains(&self, y: &DVector<f64>) -> bool {
        self.level(y) <= CAP_BOUNDARY_SLACK
    }

    fn center(&self) -> DVector<f64> {
        self.p.coords() * self.t
    }

    /// The reflection `R_H = T_{pt} o R_p o T_{-pt}` across the cap boundary.
    pub fn reflect(&self, y: &UnitVector) -> UnitVector {
        UnitVector::renormalized(self.reflect_raw(y.coords()))
    }

    pub(crate) fn reflect_raw(&self, y: &DVector<f64>) -> DVector<f64> {
        if self.t > 0.5 {
            return self.invert(y);
        }
        let c = self.center();
        // |pt| < 1, so the denominators stay away from zero on the sphere.
        let pulled = moebius_raw(&(-&c), y).expect("cap center lies inside the ball");
        let mirrored = reflect_hyperplane(self.p.coords(), &pulled).expect("p is a unit vector");
        moebius_raw(&c, &mirrored).expect("cap center lies inside the ball")
    }

    /// `R_H` as inversion in the sphere through `dH` orthogonal to the unit
    /// sphere: center `q = p / tau`, squared radius `1/tau^2 - 1`,
    /// `tau = 2t/(1+t^2)`. Every difference is formed from `1 - t` so nothing
    /// cancels as `t -> 1`.
    fn invert(&self, y: &DVector<f64>) -> DVector<f64> {
        let t = self.t;
        let p = self.p.coords();
        let tau = 2.0 * t / (1.0 + t * t);
        let gap = (1.0 - t) * (1.0 - t);
        // 1/tau - 1 and 1/tau^2 - 1.
        let excess = gap / (2.0 * t);
        let radius_sq = gap * (1.0 + t) * (1.0 + t) / (4.0 * t * t);
        let offset = (y - p) - p * excess;
        let scale = radius_sq / offset.norm_squared();
        p / tau + offset * scale
    }

    /// Distance from `y` to the center of the inversion realizing `R_H`,
    /// capped at 1: the length scale on which `R_H` varies near `y`.
    pub fn reflection_length_scale(&self, y: &DVector<f64>) -> f64 {
        let t = self.t;
        if t < 1e-3 {
            return 1.0;
        }
        let p = self.p.coords();
        let excess = (1.0 - t) * (1.0 - t) / (2.0 * t);
        ((y - p) - p * excess).norm().min(1.0)
    }

    /// Linear stretch factor of `R_H` at a point of the sphere.
    ///
    /// Written as `kappa(y) / kappa(R_H y)` with `kappa` the stretch of
    /// `T_{-pt}`, whose denominator `(1 - t)^2 + t |v - p|^2` has no
    /// cancellation near `p`.
    pub fn reflect_conformal_factor(&self, y: &DVector<f64>) -> f64 {
        let t = self.t;
        let p = self.p.coords();
        let gap = (1.0 - t) * (1.0 - t);
        let image = self.reflect_raw(y);
        (gap + t * (&image - p).norm_squared()) / (gap + t * (y - p).norm_squared())
    }

    /// The fold `F_H`: identity on `H`, `R_H` on the complement.
    pub fn fold(&self, y: &UnitVector) -> UnitVector {
        if self.contains(y.coords()) {
            y.clone()
        } else {
            self.reflect(y)
        }
    }

    /// Stretch factor of the fold: 1 inside the cap, that of `R_H` outside.
    pub fn fold_conformal_factor(&self, y: &DVector<f64>) -> f64 {
        if self.contains(y) {
            1.0
        } else {
            self.reflect_conformal_factor(y)
        }
    }
}

/// `R_H(y)` for the cap `H`.
pub fn cap_reflect(cap: &SphericalCap, y: &UnitVector) -> UnitVector {
    cap.reflect(y)
}

/// `F_H(y)` for the cap `H`.
pub fn fold_apply(cap: &SphericalCap, y: &UnitVector) -> UnitVector {
    cap.fold(y)
}

/// Stereographic chart of `S^M` centred at `pole`, projecting from `-pole`.
///
/// Chart coordinates are taken in the orthogonal complement of `pole`,
/// identified with `R^M` through a Householder reflection sending `pole` to
/// the last basis vector.
#[derive(Debug, Clone)]
pub struct StereographicChart {
    pole: UnitVector,
    householder: Option<DVector<f64>>,
}

impl StereographicChart {
    pub fn new(pole: UnitVector) -> Self {
        let dim = pole.dim();
        let mut v = pole.coords().clone();
        v[dim - 1] -= 1.0;
        let householder = if v.norm() < 1e-12 { None } else { Some(v) };
        Self { pole, householder }
    }

    pub fn pole(&self) -> &UnitVector {
        &self.pole
    }

    fn rotate(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.householder {
            None => y.clone(),
            Some(v) => y - v * (2.0 * v.dot(y) / v.norm_squared()),
        }
    }

    /// Projects `y` to `R^M`; the pole goes to the origin.
    pub fn project(&self, y: &UnitVector) -> Result<DVector<f64>> {
        if (y.coords() + self.pole.coords()).norm() < 1e-14 {
            return Err(Error::Domain("stereographic projection point is excluded".into()));
        }
        let w = self.rotate(y.coords());
        let m = w.len() - 1;
        let denom = 1.0 + w[m];
        Ok(DVector::from_fn(m, |i, _| w[i] / denom))
    }

    /// Inverse projection `R^M -> S^M \ {-pole}`.
    pub fn lift(&self, z: &DVector<f64>) -> UnitVector {
        let s = z.norm_squared();
        let m = z.len();
        let w = DVector::from_fn(m + 1, |i, _| {
            if i < m {
                2.0 * z[i] / (1.0 + s)
            } else {
                (1.0 - s) / (1.0 + s)
            }
        });
        UnitVector::renormalized(self.rotate(&w))
    }

    /// Conformal factor `2 / (1 + |z|^2)` of [`StereographicChart::lift`].
    pub fn lift_conformal_factor(z: &DVector<f64>) -> f64 {
        2.0 / (1.0 + z.norm_squared())
    }
}

/// Projects `y` through the stereographic chart centred at `pole`.
pub fn stereographic(pole: &UnitVector, y: &UnitVector) -> Result<DVector<f64>> {
    StereographicChart::new(pole.clone()).project(y)
}

/// Inverse of [`stereographic`].
pub fn stereographic_inverse(pole: &UnitVector, z: &DVector<f64>) -> UnitVector {
    StereographicChart::new(pole.clone()).lift(z)
}

/// An orthonormal basis of the tangent space `x^perp` at a unit vector `x`,
/// oriented so that `det[x, e_1, ..., e_d] = +1`.
pub fn oriented_tangent_frame(x: &DVector<f64>) -> Vec<DVector<f64>> {
    let dim = x.len();
    let mut v = x.clone();
    v[0] -= 1.0;
    let vv = v.norm_squared();
    if vv < 1e-24 {
        return (1..dim).map(|k| unit(dim, k)).collect();
    }
    // Columns of the Householder matrix H with H e_0 = x; det H = -1.
    let mut frame: Vec<DVector<f64>> = (1..dim)
        .map(|k| {
            let ek = unit(dim, k);
            &ek - &v * (2.0 * v[k] / vv)
        })
        .collect();
    frame[0] *= -1.0;
    frame
}

fn unit(dim: usize, k: usize) -> DVector<f64> {
    let mut e = DVector::zeros(dim);
    e[k] = 1.0;
    e
}

/// Matrix of `R_b` acting on `R^m`.
pub fn reflection_matrix(b: &DVector<f64>) -> Result<DMatrix<f64>> {
    let bb = b.norm_squared();
    if !(bb > 0.0) {
        return Err(Error::Domain("reflection vector must be nonzero".into()));
    }
    let m = b.len();
    Ok(DMatrix::identity(m, m) - b * b.transpose() * (2.0 / bb))
}

/// Point on the great circle through `x` in unit tangent direction `u`.
pub(crate) fn geodesic_step(x: &DVector<f64>, u: &DVector<f64>, h: f64) -> DVector<f64> {
    x * h.cos() + u * h.sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn random_ball(m: usize, rmax: f64, rng: &mut ChaCha8Rng) -> BallPoint {
        let dir = UnitVector::random(m, rng);
        let r = rmax * rng.random::<f64>();
        BallPoint::along(&dir, r).unwrap()
    }

    #[test]
    fn origin_is_identity() {
        let mut rng = rng();
        for m in 2..6 {
            let y = UnitVector::random(m, &mut rng);
            let img = moebius_apply(&BallPoint::origin(m), &y).unwrap();
            assert!((img.coords() - y.coords()).norm() < 1e-15);
        }
    }

    #[test]
    fn moebius_sends_origin_to_x() {
        let mut rng = rng();
        let x = random_ball(4, 0.95, &mut rng);
        let img = moebius_apply(&x, &BallPoint::origin(4)).unwrap();
        assert!((img.coords() - x.coords()).norm() < 1e-15);
    }

    #[test]
    fn inverse_composition_on_s2() {
        let mut rng = rng();
        for _ in 0..200 {
            let x = random_ball(3, 0.99, &mut rng);
            let y = UnitVector::random(3, &mut rng);
            let there = moebius_apply(&x, &y).unwrap();
            let back = moebius_apply(&x.neg(), &there).unwrap();
            assert!((back.coords() - y.coords()).norm() < 1e-12);
        }
    }

    #[test]
    fn sphere_is_preserved_before_renormalization() {
        let mut rng = rng();
        for _ in 0..500 {
            let x = random_ball(5, 0.999, &mut rng);
            let y = UnitVector::random(5, &mut rng);
            let raw = moebius_raw(x.coords(), y.coords()).unwrap();
            assert!((raw.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_is_preserved() {
        let mut rng = rng();
        for _ in 0..200 {
            let x = random_ball(3, 0.9, &mut rng);
            let y = random_ball(3, 0.9, &mut rng);
            let img = moebius_apply(&x, &y).unwrap();
            assert!(img.norm() < 1.0);
        }
    }

    #[test]
    fn fixed_points_are_plus_minus_direction() {
        let mut rng = rng();
        for _ in 0..50 {
            let x = random_ball(4, 0.9, &mut rng);
            let dir = UnitVector::from_direction(x.coords().clone()).unwrap();
            for y in [dir.clone(), dir.neg()] {
                let img = moebius_apply(&x, &y).unwrap();
                assert!((img.coords() - y.coords()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn ball_point_rejects_boundary() {
        assert!(BallPoint::from_slice(&[1.0, 0.0]).is_err());
        assert!(BallPoint::from_slice(&[0.6, 0.8]).is_err());
        assert!(BallPoint::from_slice(&[0.6, 0.79]).is_ok());
    }

    #[test]
    fn unit_vector_rejects_non_unit() {
        assert!(UnitVector::from_slice(&[1.0, 1.0]).is_err());
        assert!(UnitVector::from_direction(DVector::zeros(3)).is_err());
    }

    #[test]
    fn moebius_conformality_on_sphere() {
        // Tangent frames map with one scalar factor equal to the analytic one.
        let mut rng = rng();
        let h = 1e-6;
        for _ in 0..50 {
            let x = random_ball(4, 0.8, &mut rng);
            let y = UnitVector::random(4, &mut rng);
            let frame = oriented_tangent_frame(y.coords());
            let images: Vec<DVector<f64>> = frame
                .iter()
                .map(|u| {
                    let fwd = moebius_raw(x.coords(), &geodesic_step(y.coords(), u, h)).unwrap();
                    let bwd = moebius_raw(x.coords(), &geodesic_step(y.coords(), u, -h)).unwrap();
                    (fwd - bwd) / (2.0 * h)
                })
                .collect();
            let k = moebius_conformal_factor(x.coords(), y.coords());
            for i in 0..images.len() {
                for j in 0..images.len() {
                    let g = images[i].dot(&images[j]);
                    let expect = if i == j { k * k } else { 0.0 };
                    assert!((g - expect).abs() < 1e-6 * k * k, "{g} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn hyperplane_reflection_examples() {
        let b = DVector::from_vec(vec![1.0, 2.0, -0.5]);
        let img = reflect_hyperplane(&b, &b).unwrap();
        assert!((img + &b).norm() < 1e-15);
        let perp = DVector::from_vec(vec![2.0, -1.0, 0.0]);
        assert!((reflect_hyperplane(&b, &perp).unwrap() - &perp).norm() < 1e-15);
        assert!(reflect_hyperplane(&DVector::zeros(3), &perp).is_err());
    }

    #[test]
    fn hyperplane_reflection_is_isometric_involution() {
        let mut rng = rng();
        for _ in 0..100 {
            let b = DVector::from_fn(5, |_, _| rng.random::<f64>() - 0.5);
            let y = DVector::from_fn(5, |_, _| rng.random::<f64>() - 0.5);
            let once = reflect_hyperplane(&b, &y).unwrap();
            let twice = reflect_hyperplane(&b, &once).unwrap();
            assert!((twice - &y).norm() < 1e-14);
            assert!((once.norm() - y.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn cap_reflection_sends_p_to_antipode() {
        let mut rng = rng();
        for &t in &[0.0, 0.3, 0.7, 0.99] {
            let p = UnitVector::random(5, &mut rng);
            let cap = SphericalCap::new(p.clone(), t).unwrap();
            let img = cap_reflect(&cap, &p);
            assert!((img.coords() + p.coords()).norm() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn cap_at_zero_is_plain_reflection() {
        let mut rng = rng();
        let p = UnitVector::random(4, &mut rng);
        let cap = SphericalCap::new(p.clone(), 0.0).unwrap();
        for _ in 0..20 {
            let y = UnitVector::random(4, &mut rng);
            let a = cap.reflect(&y);
            let b = reflect_hyperplane(p.coords(), y.coords()).unwrap();
            assert!((a.coords() - b).norm() < 1e-14);
        }
    }

    #[test]
    fn cap_boundary_is_fixed() {
        let mut rng = rng();
        for &t in &[0.1, 0.5, 0.9] {
            let p = UnitVector::random(3, &mut rng);
            let cap = SphericalCap::new(p.clone(), t).unwrap();
            let h = cap.threshold();
            for _ in 0..50 {
                let u = UnitVector::random(3, &mut rng);
                let tangent = u.coords() - p.coords() * u.dot(&p);
                let tangent = tangent.normalize();
                let y = UnitVector::new(p.coords() * h + tangent * (1.0 - h * h).sqrt()).unwrap();
                let img = cap.reflect(&y);
                assert!((img.coords() - y.coords()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cap_membership_matches_image_of_hemisphere() {
        // y in T_{pt}(H_p)  <=>  T_{-pt}(y) in H_p.
        let mut rng = rng();
        for &t in &[0.2, 0.6, 0.95] {
            let p = UnitVector::random(4, &mut rng);
            let cap = SphericalCap::new(p.clone(), t).unwrap();
            let center = BallPoint::along(&p, t).unwrap();
            for _ in 0..2000 {
                let y = UnitVector::random(4, &mut rng);
                let pulled = moebius_apply(&center.neg(), &y).unwrap();
                let in_image = pulled.dot(&p) <= 0.0;
                if cap.level(y.coords()).abs() > 1e-9 {
                    assert_eq!(in_image, cap.contains(y.coords()));
                }
            }
        }
    }

    #[test]
    fn fold_lands_in_cap_and_is_idempotent() {
        let mut rng = rng();
        for &t in &[0.0, 0.4, 0.8, 0.99] {
            let p = UnitVector::random(5, &mut rng);
            let cap = SphericalCap::new(p.clone(), t).unwrap();
            for _ in 0..10_000 {
                let y = UnitVector::random(5, &mut rng);
                let f = fold_apply(&cap, &y);
                assert!(cap.level(f.coords()) <= 1e-10);
                let ff = fold_apply(&cap, &f);
                assert!((ff.coords() - f.coords()).norm() < 1e-9);
            }
            // p lies outside every cap with t < 1.
            assert!((fold_apply(&cap, &p).coords() + p.coords()).norm() < 1e-10);
        }
    }

    #[test]
    fn fold_is_identity_inside_cap() {
        let p = UnitVector::basis(3, 2);
        let cap = SphericalCap::new(p, 0.5).unwrap();
        let y = UnitVector::basis(3, 0);
        assert_eq!(fold_apply(&cap, &y), y);
    }

    #[test]
    fn cap_rejects_t_out_of_range() {
        let p = UnitVector::basis(3, 0);
        assert!(SphericalCap::new(p.clone(), 1.0).is_err());
        assert!(SphericalCap::new(p.clone(), -0.1).is_err());
        assert_eq!(SphericalCap::clamped(p, 1.0).t(), CAP_T_MAX);
    }

    #[test]
    fn reflect_conformal_factor_matches_finite_differences() {
        let mut rng = rng();
        let h = 1e-6;
        for &t in &[0.0, 0.5, 0.9] {
            let cap = SphericalCap::new(UnitVector::random(3, &mut rng), t).unwrap();
            for _ in 0..20 {
                let y = UnitVector::random(3, &mut rng);
                let u = &oriented_tangent_frame(y.coords())[0];
                let fwd = cap.reflect_raw(&geodesic_step(y.coords(), u, h));
                let bwd = cap.reflect_raw(&geodesic_step(y.coords(), u, -h));
                let fd = ((fwd - bwd) / (2.0 * h)).norm();
                let k = cap.reflect_conformal_factor(y.coords());
                assert!((fd - k).abs() < 1e-6 * k.max(1.0));
            }
        }
    }

    #[test]
    fn stereographic_pole_goes_to_origin() {
        let mut rng = rng();
        let pole = UnitVector::random(4, &mut rng);
        let z = stereographic(&pole, &pole).unwrap();
        assert!(z.norm() < 1e-15);
        assert!(stereographic(&pole, &pole.neg()).is_err());
    }

    #[test]
    fn stereographic_round_trip() {
        let mut rng = rng();
        for m in [2usize, 3, 5] {
            let pole = UnitVector::random(m + 1, &mut rng);
            let chart = StereographicChart::new(pole);
            for _ in 0..100 {
                let z = DVector::from_fn(m, |_, _| 4.0 * (rng.random::<f64>() - 0.5));
                let y = chart.lift(&z);
                let back = chart.project(&y).unwrap();
                assert!((back - &z).norm() < 1e-12 * (1.0 + z.norm_squared()));
            }
        }
    }

    #[test]
    fn stereographic_lift_conformal_factor() {
        // Oracle: central-difference Jacobian of the lift.
        let mut rng = rng();
        let chart = StereographicChart::new(UnitVector::random(4, &mut rng));
        let h = 1e-6;
        for _ in 0..30 {
            let z = DVector::from_fn(3, |_, _| 2.0 * (rng.random::<f64>() - 0.5));
            let cols: Vec<DVector<f64>> = (0..3)
                .map(|k| {
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[k] += h;
                    zm[k] -= h;
                    (chart.lift(&zp).into_inner() - chart.lift(&zm).into_inner()) / (2.0 * h)
                })
                .collect();
            let k = StereographicChart::lift_conformal_factor(&z);
            for i in 0..3 {
                for j in 0..3 {
                    let g = cols[i].dot(&cols[j]);
                    let expect = if i == j { k * k } else { 0.0 };
                    assert!((g - expect).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn tangent_frame_is_oriented_orthonormal() {
        let mut rng = rng();
        for dim in 2..6 {
            for x in [UnitVector::basis(dim, 0), UnitVector::random(dim, &mut rng)] {
                let frame = oriented_tangent_frame(x.coords());
                let mut m = DMatrix::zeros(dim, dim);
                m.set_column(0, x.coords());
                for (k, e) in frame.iter().enumerate() {
                    m.set_column(k + 1, e);
                }
                let gram = m.transpose() * &m;
                assert!((gram - DMatrix::identity(dim, dim)).norm() < 1e-14);
                assert!((m.determinant() - 1.0).abs() < 1e-12);
            }
        }
    }
}
