//! Topological degree of sphere self-maps and of maps between bounded regions
//! of `R^{2n+2}` related by the reflection `(a, b) -> (R_b a, -b)`.
//!
//! Two independent degree computations are provided for maps of `S^d`,
//! `d <= 3`: the normalized pullback of the volume form,
//! `(1 / Vol) * integral of det[phi, d_1 phi, ..., d_d phi]`, and a signed
//! count of the preimages of a regular value.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quadrature::{build_sphere_rule, central_difference_jacobian, sphere_volume};
use crate::sphere_geom::{geodesic_step, oriented_tangent_frame, reflect_hyperplane, UnitVector};
use crate::{Error, Result};

/// A pullback integral further than this from an integer is rejected.
pub const RESOLUTION_TOL: f64 = 0.05;
/// Step of the geodesic difference stencil.
const STENCIL_STEP: f64 = 1e-3;
/// Newton residual accepted as a root.
const ROOT_TOL: f64 = 1e-11;
/// Two roots closer than this are the same root.
const ROOT_MERGE: f64 = 1e-7;
/// Below this `|det|` a preimage is treated as critical.
const REGULAR_TOL: f64 = 1e-8;
/// Symmetry defects above this fail the reflection check.
pub const SYMMETRY_TOL: f64 = 1e-9;

type VecFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type MatFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Names accepted by [`SphereSelfMap::named`].
pub const MAP_NAMES: [&str; 5] = ["identity", "antipodal", "flip-b", "flip-b-warped", "double-angle"];

/// A continuous map `S^d -> S^d` with an optional ambient Jacobian.
#[derive(Clone)]
pub struct SphereSelfMap {
    dim: usize,
    name: String,
    eval: VecFn,
    jacobian: Option<MatFn>,
}

impl std::fmt::Debug for SphereSelfMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SphereSelfMap")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl SphereSelfMap {
    /// Wraps `f: R^{d+1} -> R^{d+1}`, which must send `S^d` into `S^d`.
    pub fn new<F>(dim: usize, name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            name: name.into(),
            eval: Arc::new(f),
            jacobian: None,
        }
    }

    /// Attaches the ambient Jacobian `(d+1) x (d+1)` of the evaluator.
    pub fn with_jacobian<J>(mut self, j: J) -> Self
    where
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(j));
        self
    }

    /// The linear map `x -> M x`, valid when `M` is orthogonal.
    pub fn linear(name: impl Into<String>, m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() < 2 {
            return Err(Error::Domain("linear sphere map needs a square matrix of size >= 2".into()));
        }
        let defect = (m.transpose() * &m - DMatrix::identity(m.nrows(), m.nrows())).norm();
        if defect > 1e-12 {
            return Err(Error::Domain(format!("matrix is not orthogonal (defect {defect:.2e})")));
        }
        let dim = m.nrows() - 1;
        let mj = m.clone();
        Ok(Self::new(dim, name, move |x| &m * x).with_jacobian(move |_| mj.clone()))
    }

    /// Built-in maps by name. `flip-b` and `flip-b-warped` need odd `dim`;
    /// `double-angle` needs `dim = 1`.
    pub fn named(name: &str, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("sphere dimension must be positive".into()));
        }
        let m = dim + 1;
        match name {
            "identity" => Self::linear(name, DMatrix::identity(m, m)),
            "antipodal" => Self::linear(name, -DMatrix::identity(m, m)),
            "flip-b" => {
                let half = split_half(dim)?;
                let diag = DVector::from_fn(m, |i, _| if i < half { 1.0 } else { -1.0 });
                Self::linear(name, DMatrix::from_diagonal(&diag))
            }
            "flip-b-warped" => {
                let half = split_half(dim)?;
                Ok(Self::new(dim, name, move |x| {
                    let bb: f64 = x.rows(half, half).norm_squared();
                    let mut y = x.clone();
                    y.rows_mut(half, half).scale_mut(-(1.0 + bb));
                    let r = y.norm();
                    y / r
                }))
            }
            "double-angle" => {
                if dim != 1 {
                    return Err(Error::Domain("double-angle is a map of S^1".into()));
                }
                Ok(Self::new(1, name, |x| {
                    DVector::from_vec(vec![x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]])
                })
                .with_jacobian(|x| {
                    DMatrix::from_row_slice(2, 2, &[2.0 * x[0], -2.0 * x[1], 2.0 * x[1], 2.0 * x[0]])
                }))
            }
            other => Err(Error::Domain(format!(
                "unknown map '{other}'; expected one of {}",
                MAP_NAMES.join(", ")
            ))),
        }
    }

    /// Homotopy on `S^3` from the identity (`s = 0`) to `flip-b` (`s = 1`):
    /// the `b` block is rotated by the angle `pi s`.
    pub fn rotate_b(s: f64) -> Self {
        let (c, sn) = ((std::f64::consts::PI * s).cos(), (std::f64::consts::PI * s).sin());
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, c, -sn, 0.0, 0.0, sn, c],
        );
        let jm = m.clone();
        Self::new(3, format!("rotate-b({s})"), move |x| &m * x).with_jacobian(move |_| jm.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Evaluates the map and checks that the output is a unit vector.
    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let y = (self.eval)(x);
        let defect = (y.norm() - 1.0).abs();
        if y.len() != self.dim + 1 || !(defect <= 1e-10) {
            return Err(Error::Evaluation {
                node: x.as_slice().to_vec(),
                value: y.norm(),
            });
        }
        Ok(y)
    }

    /// Derivatives of the map along the tangent vectors `frame` at `x`.
    pub fn tangent_derivatives(&self, x: &DVector<f64>, frame: &[DVector<f64>]) -> Vec<DVector<f64>> {
        if let Some(j) = &self.jacobian {
            let jx = j(x);
            return frame.iter().map(|e| &jx * e).collect();
        }
        let h = STENCIL_STEP;
        frame
            .iter()
            .map(|e| {
                let f = |k: f64| (self.eval)(&geodesic_step(x, e, k * h));
                (f(-2.0) - f(2.0) + (f(1.0) - f(-1.0)) * 8.0) / (12.0 * h)
            })
            .collect()
    }

    /// `det[phi(x), d_1 phi, ..., d_d phi]` in an oriented frame at `x`.
    pub fn jacobian_determinant(&self, x: &DVector<f64>) -> Result<f64> {
        let frame = oriented_tangent_frame(x);
        let mut cols = vec![self.eval(x)?];
        cols.extend(self.tangent_derivatives(x, &frame));
        Ok(DMatrix::from_columns(&cols).determinant())
    }
}

fn split_half(dim: usize) -> Result<usize> {
    if dim.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "the (a, b) splitting needs an odd-dimensional sphere, got S^{dim}"
        )));
    }
    Ok(dim.div_ceil(2))
}

/// Value of the pullback integral and its nearest integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeEstimate {
    pub value: f64,
    pub degree: i64,
    pub distance: f64,
    pub nodes: usize,
}

/// Default polynomial exactness of the pullback quadrature.
pub const DEFAULT_RESOLUTION: usize = 24;

/// Degree as the normalized integral of the pulled-back volume form.
pub fn degree_integral(map: &SphereSelfMap, resolution: usize) -> Result<DegreeEstimate> {
    let d = map.dim();
    if d > 3 {
        return Err(Error::Domain(format!("degree integrals are available on S^1..S^3, got S^{d}")));
    }
    let rule = build_sphere_rule(d, resolution)?;
    let dets: Vec<Result<f64>> = rule
        .nodes()
        .par_iter()
        .map(|x| map.jacobian_determinant(x.coords()))
        .collect();
    let mut total = 0.0;
    for (det, w) in dets.into_iter().zip(rule.weights()) {
        total += w * det?;
    }
    let value = total / sphere_volume(d);
    let degree = value.round();
    let distance = (value - degree).abs();
    if !(distance <= RESOLUTION_TOL) {
        return Err(Error::Resolution { value, distance });
    }
    Ok(DegreeEstimate {
        value,
        degree: degree as i64,
        distance,
        nodes: rule.len(),
    })
}

/// A located preimage with the sign of its Jacobian determinant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preimage {
    pub point: Vec<f64>,
    pub determinant: f64,
    pub sign: i64,
}

/// Signed preimage count of a regular value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreimageCount {
    pub target: Vec<f64>,
    pub preimages: Vec<Preimage>,
    pub degree: i64,
    pub starts: usize,
}

/// Degree as the signed number of solutions of `phi(x) = target`, found by
/// Gauss-Newton on the sphere from `starts` seeded random points.
pub fn degree_regular_value(
    map: &SphereSelfMap,
    target: &UnitVector,
    starts: usize,
    seed: u64,
) -> Result<PreimageCount> {
    let d = map.dim();
    if target.dim() != d + 1 {
        return Err(Error::Domain(format!(
            "target lives in R^{}, map acts on S^{d}",
            target.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<DVector<f64>> = (0..starts)
        .map(|_| UnitVector::random(d + 1, &mut rng).into_inner())
        .collect();
    let y = target.coords();
    let found: Vec<Option<DVector<f64>>> = seeds.par_iter().map(|x0| sphere_newton(map, y, x0)).collect();

    let mut roots: Vec<DVector<f64>> = Vec::new();
    for x in found.into_iter().flatten() {
        if roots.iter().all(|r| (r - &x).norm() > ROOT_MERGE) {
            roots.push(x);
        }
    }
    roots.sort_by(|p, q| lex_cmp(p.as_slice(), q.as_slice()));

    let mut preimages = Vec::with_capacity(roots.len());
    for x in roots {
        let det = map.jacobian_determinant(&x)?;
        if det.abs() < REGULAR_TOL {
            return Err(Error::Domain(format!(
                "target is not a regular value: det {det:.2e} at {:?}",
                x.as_slice()
            )));
        }
        preimages.push(Preimage {
            point: x.as_slice().to_vec(),
            determinant: det,
            sign: det.signum() as i64,
        });
    }
    let degree = preimages.iter().map(|p| p.sign).sum();
    Ok(PreimageCount {
        target: y.as_slice().to_vec(),
        preimages,
        degree,
        starts,
    })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn sphere_newton(map: &SphereSelfMap, y: &DVector<f64>, x0: &DVector<f64>) -> Option<DVector<f64>> {
    let mut x = x0.clone();
    for _ in 0..80 {
        let r = map.eval(&x).ok()? - y;
        if r.norm() < ROOT_TOL {
            return Some(x);
        }
        let frame = oriented_tangent_frame(&x);
        let j = DMatrix::from_columns(&map.tangent_derivatives(&x, &frame));
        let u = j.svd(true, true).solve(&(-&r), 1e-14).ok()?;
        let mut step: DVector<f64> = frame.iter().zip(u.iter()).map(|(e, &c)| e * c).sum();
        let len = step.norm();
        if len > 0.5 {
            step *= 0.5 / len;
        }
        x = (&x + step).normalize();
    }
    let r = map.eval(&x).ok()? - y;
    (r.norm() < ROOT_TOL).then_some(x)
}

/// Both degree computations and their agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub map: String,
    pub dim: usize,
    pub integral: DegreeEstimate,
    pub count: PreimageCount,
}

/// Runs both methods; a disagreement is reported as a suspected missed
/// preimage.
pub fn degree_both(
    map: &SphereSelfMap,
    resolution: usize,
    target: &UnitVector,
    starts: usize,
    seed: u64,
) -> Result<DegreeReport> {
    let integral = degree_integral(map, resolution)?;
    let count = degree_regular_value(map, target, starts, seed)?;
    if integral.degree != count.degree {
        return Err(Error::DegreeMismatch {
            integral: integral.degree,
            count: count.degree,
        });
    }
    Ok(DegreeReport {
        map: map.name().to_string(),
        dim: map.dim(),
        integral,
        count,
    })
}

/// A fixed generic target on `S^d`, reproducible from the seed.
pub fn generic_target(dim: usize, seed: u64) -> UnitVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    UnitVector::random(dim + 1, &mut rng)
}

/// Largest defects found by [`reflection_symmetry_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub n: usize,
    pub samples: usize,
    pub max_symmetry_defect: f64,
    pub max_equator_defect: f64,
    pub passed: bool,
}

/// Samples `(a, b)` on `S^{2n+1}` and measures
/// `|(R_b x R_b) phi(a, b) - phi(R_b a, -b)|` for `b != 0` and
/// `|phi(a, 0) - (a, 0)|` on the equator.
pub fn reflection_symmetry_check(map: &SphereSelfMap, n: usize, samples: usize, seed: u64) -> Result<SymmetryReport> {
    if map.dim() != 2 * n + 1 {
        return Err(Error::Domain(format!(
            "reflection symmetry with n = {n} needs S^{}, got S^{}",
            2 * n + 1,
            map.dim()
        )));
    }
    let k = n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sym: f64 = 0.0;
    let mut eq: f64 = 0.0;
    for _ in 0..samples {
        let x = UnitVector::random(2 * k, &mut rng).into_inner();
        let (a, b) = split(&x, k);
        if b.norm() < 1e-3 {
            continue;
        }
        let lhs = reflect_pair(&b, &map.eval(&x)?, k)?;
        let rhs = map.eval(&join(&reflect_hyperplane(&b, &a)?, &(-&b)))?;
        sym = sym.max((lhs - rhs).norm());

        let a0: DVector<f64> = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
        let x0 = join(&a0, &DVector::zeros(k));
        eq = eq.max((map.eval(&x0)? - &x0).norm());
    }
    Ok(SymmetryReport {
        n,
        samples,
        max_symmetry_defect: sym,
        max_equator_defect: eq,
        passed: sym <= SYMMETRY_TOL && eq <= SYMMETRY_TOL,
    })
}

fn split(x: &DVector<f64>, k: usize) -> (DVector<f64>, DVector<f64>) {
    (x.rows(0, k).into_owned(), x.rows(k, x.len() - k).into_owned())
}

fn join(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

fn reflect_pair(b: &DVector<f64>, v: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
    let (v1, v2) = split(v, k);
    Ok(join(&reflect_hyperplane(b, &v1)?, &reflect_hyperplane(b, &v2)?))
}

/// Degrees along `rotate-b(s)`, `s = 0, 1/steps, ..., 1`.
pub fn homotopy_spot_check(steps: usize, resolution: usize) -> Result<Vec<(f64, i64)>> {
    (0..=steps)
        .map(|i| {
            let s = i as f64 / steps.max(1) as f64;
            Ok((s, degree_integral(&SphereSelfMap::rotate_b(s), resolution)?.degree))
        })
        .collect()
}

/// A map `R^{2n+2} -> R^{2n+2}` on a bounded region.
#[derive(Clone)]
pub struct EuclideanMap {
    dim: usize,
    name: String,
    eval: VecFn,
}

impl std::fmt::Debug for EuclideanMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EuclideanMap")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .finish()
    }
}

impl EuclideanMap {
    pub fn new<F>(dim: usize, name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            name: name.into(),
            eval: Arc::new(f),
        }
    }

    /// `x -> M (x - x0)`.
    pub fn affine(name: impl Into<String>, m: DMatrix<f64>, x0: DVector<f64>) -> Self {
        Self::new(x0.len(), name, move |x| &m * (x - &x0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.eval)(x)
    }
}

/// `D_+` as a box `a in prod a_box, b in prod b_box` in `R^{n+1} x R^{n+1}`,
/// together with its mirror `D_- = {(R_b a, -b)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedRegion {
    a_box: Vec<(f64, f64)>,
    b_box: Vec<(f64, f64)>,
}

impl SignedRegion {
    /// Requires one `b` interval that excludes zero, so `b != 0` on `D_+`.
    pub fn new(a_box: Vec<(f64, f64)>, b_box: Vec<(f64, f64)>) -> Result<Self> {
        if a_box.len() != b_box.len() || a_box.is_empty() {
            return Err(Error::Domain("a and b boxes must have the same positive dimension".into()));
        }
        if a_box.iter().chain(&b_box).any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::Domain("box intervals must be nondegenerate".into()));
        }
        if !b_box.iter().any(|&(lo, hi)| lo > 0.0 || hi < 0.0) {
            return Err(Error::Domain("D_+ must avoid b = 0".into()));
        }
        Ok(Self { a_box, b_box })
    }

    /// The `n` with ambient dimension `2n + 2`.
    pub fn n(&self) -> usize {
        self.a_box.len() - 1
    }

    pub fn ambient_dim(&self) -> usize {
        2 * self.a_box.len()
    }

    /// `(a, b) -> (R_b a, -b)`, an involution exchanging `D_+` and `D_-`.
    pub fn mirror(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (a, b) = split(x, self.a_box.len());
        Ok(join(&reflect_hyperplane(&b, &a)?, &(-b)))
    }

    /// Signed distance to the boundary of the `D_+` box, positive inside.
    pub fn plus_depth(&self, x: &DVector<f64>) -> f64 {
        self.a_box
            .iter()
            .chain(&self.b_box)
            .zip(x.iter())
            .map(|(&(lo, hi), &v)| (v - lo).min(hi - v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Depth of `x` in `D_-`, measured through the mirror.
    pub fn minus_depth(&self, x: &DVector<f64>) -> f64 {
        self.mirror(x).map(|y| self.plus_depth(&y)).unwrap_or(f64::NEG_INFINITY)
    }

    /// Cell centers of a `k^{2n+2}` grid over `D_+`.
    pub fn plus_grid(&self, k: usize) -> Vec<DVector<f64>> {
        let sides: Vec<(f64, f64)> = self.a_box.iter().chain(&self.b_box).copied().collect();
        let dim = sides.len();
        let total = k.pow(dim as u32);
        (0..total)
            .map(|mut idx| {
                DVector::from_fn(dim, |i, _| {
                    let j = idx % k;
                    idx /= k;
                    let (lo, hi) = sides[i];
                    lo + (hi - lo) * (j as f64 + 0.5) / k as f64
                })
            })
            .collect()
    }
}

/// A zero of a Euclidean map with its Jacobian sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub point: Vec<f64>,
    pub determinant: f64,
    pub sign: i64,
}

/// Result of [`change_of_variables_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeOfVariablesReport {
    pub map: String,
    pub n: usize,
    pub zeros_minus: Vec<Zero>,
    pub zeros_plus: Vec<Zero>,
    pub degree_minus: i64,
    pub degree_plus: i64,
    /// `(-1)^n`.
    pub factor: i64,
    pub holds: bool,
}

/// `Psi(a, b) = (R_b x R_b) phi(R_b a, -b)` on `D_+`.
pub fn mirrored_map(phi: &EuclideanMap, region: &SignedRegion) -> EuclideanMap {
    let k = region.a_box.len();
    let (phi, region) = (phi.clone(), region.clone());
    EuclideanMap::new(2 * k, format!("psi[{}]", phi.name()), move |x| {
        let (_, b) = split(x, k);
        match region.mirror(x).and_then(|y| reflect_pair(&b, &phi.eval(&y), k)) {
            Ok(v) => v,
            Err(_) => DVector::from_element(2 * k, f64::NAN),
        }
    })
}

/// Counts the zeros of `phi` in `D_-` and of `Psi` in `D_+` with Jacobian
/// signs and checks `d(phi, D_-, 0) = (-1)^n d(Psi, D_+, 0)`.
pub fn change_of_variables_check(
    phi: &EuclideanMap,
    region: &SignedRegion,
    grid: usize,
) -> Result<ChangeOfVariablesReport> {
    if phi.dim() != region.ambient_dim() {
        return Err(Error::Domain(format!(
            "map acts on R^{}, region lives in R^{}",
            phi.dim(),
            region.ambient_dim()
        )));
    }
    let plus_seeds = region.plus_grid(grid);
    let minus_seeds: Vec<DVector<f64>> = plus_seeds
        .iter()
        .map(|x| region.mirror(x))
        .collect::<Result<_>>()?;
    let psi = mirrored_map(phi, region);
    let zeros_minus = count_zeros(phi, &minus_seeds, |x| region.minus_depth(x))?;
    let zeros_plus = count_zeros(&psi, &plus_seeds, |x| region.plus_depth(x))?;
    let degree_minus: i64 = zeros_minus.iter().map(|z| z.sign).sum();
    let degree_plus: i64 = zeros_plus.iter().map(|z| z.sign).sum();
    let n = region.n();
    let factor = if n.is_multiple_of(2) { 1 } else { -1 };
    Ok(ChangeOfVariablesReport {
        map: phi.name().to_string(),
        n,
        zeros_minus,
        zeros_plus,
        degree_minus,
        degree_plus,
        factor,
        holds: degree_minus == factor * degree_plus,
    })
}

fn count_zeros<D>(f: &EuclideanMap, seeds: &[DVector<f64>], depth: D) -> Result<Vec<Zero>>
where
    D: Fn(&DVector<f64>) -> f64 + Sync,
{
    let found: Vec<Option<DVector<f64>>> = seeds.par_iter().map(|x0| euclid_newton(f, x0)).collect();
    let mut roots: Vec<DVector<f64>> = Vec::new();
    for x in found.into_iter().flatten() {
        let dep = depth(&x);
        if dep < -ROOT_MERGE {
            continue;
        }
        if dep.abs() <= ROOT_MERGE {
            return Err(Error::IllPosed(format!(
                "{} vanishes on the region boundary near {:?}",
                f.name(),
                x.as_slice()
            )));
        }
        if roots.iter().all(|r| (r - &x).norm() > ROOT_MERGE) {
            roots.push(x);
        }
    }
    roots.sort_by(|p, q| lex_cmp(p.as_slice(), q.as_slice()));
    roots
        .into_iter()
        .map(|x| {
            let det = central_difference_jacobian(|z| f.eval(&DVector::from_column_slice(z)), x.as_slice(), 1e-6)
                .determinant();
            if det.abs() < REGULAR_TOL {
                return Err(Error::Domain(format!(
                    "0 is not a regular value of {}: det {det:.2e}",
                    f.name()
                )));
            }
            Ok(Zero {
                point: x.as_slice().to_vec(),
                determinant: det,
                sign: det.signum() as i64,
            })
        })
        .collect()
}

fn euclid_newton(f: &EuclideanMap, x0: &DVector<f64>) -> Option<DVector<f64>> {
    let mut x = x0.clone();
    for _ in 0..60 {
        let r = f.eval(&x);
        if !r.iter().all(|v| v.is_finite()) {
            return None;
        }
        if r.norm() < ROOT_TOL {
            return Some(x);
        }
        let j = central_difference_jacobian(|z| f.eval(&DVector::from_column_slice(z)), x.as_slice(), 1e-7);
        let mut step = j.lu().solve(&(-&r))?;
        let len = step.norm();
        if len > 0.5 {
            step *= 0.5 / len;
        }
        x += step;
    }
    (f.eval(&x).norm() < ROOT_TOL).then_some(x)
}

/// The `n = 1` region used by the shipped change-of-variables examples.
pub fn standard_region() -> SignedRegion {
    SignedRegion::new(vec![(-1.0, 1.0), (-1.0, 1.0)], vec![(-0.6, 0.6), (0.4, 1.2)])
        .expect("valid region")
}

/// A point of `D_-`: the mirror of `((0.3, -0.2), (0.25, 0.8))` in `D_+`.
pub fn standard_minus_point() -> DVector<f64> {
    let x = DVector::from_vec(vec![0.3, -0.2, 0.25, 0.8]);
    standard_region().mirror(&x).expect("b != 0")
}

/// Names of the shipped change-of-variables examples.
pub const COV_EXAMPLES: [&str; 4] = ["affine", "no-zeros", "flip-b-shifted", "square-a"];

/// Shipped `n = 1` examples on [`standard_region`].
pub fn cov_example(name: &str) -> Result<EuclideanMap> {
    let x0 = standard_minus_point();
    match name {
        "affine" => {
            let m = DMatrix::from_row_slice(
                4,
                4,
                &[2.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.5, 0.0, 0.0, -1.0, 0.0, 0.3, 0.0, 0.0, 1.0],
            );
            Ok(EuclideanMap::affine(name, m, x0))
        }
        "no-zeros" => Ok(EuclideanMap::affine(
            name,
            DMatrix::identity(4, 4),
            DVector::from_vec(vec![3.0, 0.0, 0.0, 0.0]),
        )),
        "flip-b-shifted" => {
            let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]));
            Ok(EuclideanMap::affine(name, m, x0))
        }
        "square-a" => {
            // (z - z0)^2 - rho^2 in the complex a-plane: two zeros, both positive.
            let (z0, rho) = ((0.1, 0.05), 0.3);
            let (b1, b2) = (x0[2], x0[3]);
            Ok(EuclideanMap::new(4, name, move |x| {
                let (u, v) = (x[0] - z0.0, x[1] - z0.1);
                DVector::from_vec(vec![u * u - v * v - rho * rho, 2.0 * u * v, x[2] - b1, x[3] - b2])
            }))
        }
        other => Err(Error::Domain(format!(
            "unknown example '{other}'; expected one of {}",
            COV_EXAMPLES.join(", ")
        ))),
    }
}
