//! Volumes of folded and Mobius-transformed test surfaces as the fold
//! degenerates (`t -> 1`) and as the Mobius center approaches the sphere
//! (`|x| -> 1`).
//!
//! Each volume is computed twice: once as the area of the original chart
//! weighted by the `N`-th power of the stretch factor of the map, and once
//! directly from difference Jacobians of the composed chart. Curves are
//! integrated adaptively on a mesh that is pre-split at the fold seam or
//! graded geometrically around the point the Mobius map blows up.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{
    adaptive_integrate, area_element, sphere_volume, surface_measure_adaptive,
    AdaptiveEstimate, ParamDomain, ParamSurface,
};
use crate::sphere_geom::{
    moebius_conformal_factor, moebius_raw, BallPoint, SphericalCap, StereographicChart, UnitVector,
};
use crate::veronese::veronese_apply;

/// Default parameter sequence for both limits.
pub const DEFAULT_SEQUENCE: [f64; 4] = [0.9, 0.99, 0.999, 0.9999];

const PANEL_BUDGET: usize = 4_000;
const SCAN_POINTS: usize = 4096;
/// Base step of the fourth-order stencil, relative to the distance from the
/// singular point of the map.
const DIFF_STEP: f64 = 1e-3;
/// Tolerance floor for the direct route, whose integrand carries
/// difference-quotient noise.
const DIRECT_TOL: f64 = 1e-8;

/// A chart `omega: D -> S^M` with a known parameter domain.
pub trait LimitSurface: ParamSurface {
    fn domain(&self) -> ParamDomain;
    /// Dimension of the ambient vector space, `M + 1`.
    fn ambient_dim(&self) -> usize;
    fn label(&self) -> String;
}

/// Great-circle arc `s -> a cos s + b sin s`, `s` in `[s0, s1]`.
#[derive(Debug, Clone)]
pub struct GreatCircleArc {
    a: DVector<f64>,
    b: DVector<f64>,
    s0: f64,
    s1: f64,
}

impl GreatCircleArc {
    /// Arc of half-length `half` centred at `center`, leaving it along
    /// `direction` (projected to the tangent space).
    pub fn through(center: &UnitVector, direction: &DVector<f64>, half: f64) -> Result<Self> {
        let a = center.coords().clone();
        let b = direction - &a * a.dot(direction);
        let norm = b.norm();
        if !(norm > 1e-12) {
            return Err(Error::Domain("arc direction is parallel to its center".into()));
        }
        if !(half > 0.0 && half <= PI) {
            return Err(Error::Domain(format!("arc half-length must lie in (0, pi], got {half}")));
        }
        Ok(Self {
            a,
            b: b / norm,
            s0: -half,
            s1: half,
        })
    }

    pub fn length(&self) -> f64 {
        self.s1 - self.s0
    }
}

impl ParamSurface for GreatCircleArc {
    fn param_dim(&self) -> usize {
        1
    }

    fn eval(&self, z: &[f64]) -> DVector<f64> {
        &self.a * z[0].cos() + &self.b * z[0].sin()
    }

    fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let col = &self.b * z[0].cos() - &self.a * z[0].sin();
        DMatrix::from_column_slice(col.len(), 1, col.as_slice())
    }
}

impl LimitSurface for GreatCircleArc {
    fn domain(&self) -> ParamDomain {
        ParamDomain::Interval(self.s0, self.s1)
    }

    fn ambient_dim(&self) -> usize {
        self.a.len()
    }

    fn label(&self) -> String {
        format!("great-circle-arc(length={:.6})", self.length())
    }
}

/// The Veronese surface over the chart `z -> (z, 1)/|(z, 1)|` of `S^2`,
/// restricted to `|z| <= radius`; lives in `S^4`.
#[derive(Debug, Clone, Copy)]
pub struct VeronesePatch {
    pub radius: f64,
}

impl ParamSurface for VeronesePatch {
    fn param_dim(&self) -> usize {
        2
    }

    fn eval(&self, z: &[f64]) -> DVector<f64> {
        let y = DVector::from_vec(vec![z[0], z[1], 1.0]).normalize();
        veronese_apply(2, y.as_slice()).expect("input has length 3")
    }
}

impl LimitSurface for VeronesePatch {
    fn domain(&self) -> ParamDomain {
        ParamDomain::Disk(self.radius)
    }

    fn ambient_dim(&self) -> usize {
        5
    }

    fn label(&self) -> String {
        format!("veronese-patch(radius={})", self.radius)
    }
}

/// A geodesic ball of `S^N` (`N` in `{1, 2}`) around `pole`, given by a disk
/// of a stereographic chart and sitting in the first `N + 1` coordinates of
/// `R^{M+1}`.
#[derive(Debug, Clone)]
pub struct FlatCap {
    chart: StereographicChart,
    n: usize,
    ambient: usize,
    radius: f64,
}

impl FlatCap {
    pub fn new(pole: UnitVector, ambient: usize, radius: f64) -> Result<Self> {
        let n = pole.dim() - 1;
        if !(1..=2).contains(&n) || ambient < n + 1 {
            return Err(Error::Domain(format!(
                "flat caps need N in {{1, 2}} and ambient >= N + 1 (N = {n}, ambient = {ambient})"
            )));
        }
        Ok(Self {
            chart: StereographicChart::new(pole),
            n,
            ambient,
            radius,
        })
    }

    /// Exact `N`-volume of the cap (`2 * 2 atan(r)` or `2 pi (1 - cos(2 atan r))`).
    pub fn exact_measure(&self) -> f64 {
        let angle = 2.0 * self.radius.atan();
        match self.n {
            1 => 2.0 * angle,
            _ => 2.0 * PI * (1.0 - angle.cos()),
        }
    }
}

impl ParamSurface for FlatCap {
    fn param_dim(&self) -> usize {
        self.n
    }

    fn eval(&self, z: &[f64]) -> DVector<f64> {
        let y = self.chart.lift(&DVector::from_column_slice(z));
        let mut out = DVector::zeros(self.ambient);
        out.rows_mut(0, self.n + 1).copy_from(y.coords());
        out
    }
}

impl LimitSurface for FlatCap {
    fn domain(&self) -> ParamDomain {
        match self.n {
            1 => ParamDomain::Interval(-self.radius, self.radius),
            _ => ParamDomain::Disk(self.radius),
        }
    }

    fn ambient_dim(&self) -> usize {
        self.ambient
    }

    fn label(&self) -> String {
        format!("flat-cap(N={}, radius={})", self.n, self.radius)
    }
}

/// One parameter value of a limit experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub parameter: f64,
    pub volume: f64,
    pub bound: f64,
    pub margin: f64,
    pub quad_error: f64,
}

impl LimitRow {
    /// `volume - quad_error <= bound (1 + band)`.
    pub fn within(&self, band: f64) -> bool {
        self.volume - self.quad_error <= self.bound * (1.0 + band)
    }
}

/// Volumes along an increasing parameter sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitExperiment {
    pub surface: String,
    pub dimension: usize,
    /// Volume of the undeformed surface.
    pub reference_volume: f64,
    pub rows: Vec<LimitRow>,
    /// Same volumes computed from difference Jacobians of the composed chart.
    pub direct_volumes: Vec<f64>,
}

impl LimitExperiment {
    /// Largest relative disagreement between the weighted and direct routes.
    pub fn max_route_disagreement(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.direct_volumes)
            .map(|(r, d)| (r.volume - d).abs() / r.volume.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

fn check_sequence(seq: &[f64]) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::Domain("parameter sequence is empty".into()));
    }
    if seq.iter().any(|s| !(0.0..1.0).contains(s)) {
        return Err(Error::Domain("parameters must lie in [0, 1)".into()));
    }
    if seq.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("parameter sequence must be strictly increasing".into()));
    }
    Ok(())
}

/// Integrates `f` over `[a, b]` adaptively on each piece of the sorted
/// breakpoints.
fn integrate_pieces<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<AdaptiveEstimate>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut points: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&s| s > a && s < b))
        .chain(std::iter::once(b))
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (b - a));
    let pieces = (points.len() - 1) as f64;
    let mut total = AdaptiveEstimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    for w in points.windows(2) {
        let est = adaptive_integrate(&f, w[0], w[1], tol / pieces, PANEL_BUDGET)?;
        total.value += est.value;
        total.error += est.error;
        total.evaluations += est.evaluations;
    }
    Ok(total)
}

fn scan(a: f64, b: f64, count: usize) -> impl Iterator<Item = f64> {
    (0..=count).map(move |i| a + (b - a) * i as f64 / count as f64)
}

/// Parameters where a curve crosses the boundary of `cap`.
fn seam_crossings(surface: &dyn LimitSurface, cap: &SphericalCap, a: f64, b: f64) -> Vec<f64> {
    // Sample finely enough to see a complement of angular radius rho.
    let rho = cap.threshold().clamp(-1.0, 1.0).acos().max(1e-9);
    let count = ((32.0 * (b - a) / rho).ceil() as usize).clamp(SCAN_POINTS, 4_000_000);
    let level = |s: f64| cap.level(&surface.eval(&[s]));
    let samples: Vec<(f64, f64)> = scan(a, b, count).map(|s| (s, level(s))).collect();
    let mut out = Vec::new();
    for w in samples.windows(2) {
        let ((mut lo, flo), (mut hi, _)) = (w[0], w[1]);
        if (flo > 0.0) == (w[1].1 > 0.0) {
            continue;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if (level(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

/// Breakpoints graded geometrically around the maximizer of `weight`.
fn graded_breaks<F: Fn(f64) -> f64>(weight: F, a: f64, b: f64) -> Vec<f64> {
    let (peak, _) = scan(a, b, SCAN_POINTS)
        .map(|s| (s, weight(s)))
        .fold((a, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let mut out = vec![peak];
    let width = b - a;
    for k in 1..=50 {
        let d = width * 0.5f64.powi(k);
        out.push(peak - d);
        out.push(peak + d);
    }
    out
}

/// Volume of `gamma` itself.
pub fn surface_volume(surface: &dyn LimitSurface, tol: f64) -> Result<AdaptiveEstimate> {
    surface_measure_adaptive(surface, None, surface.domain(), tol)
}

/// Fourth-order central-difference Jacobian. Callers scale the step to the
/// distance from the point where the map blows up.
fn stencil_jacobian<F>(f: F, z: &[f64], h: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let mut zp = z.to_vec();
    let mut at = |k: usize, d: f64| {
        zp[k] = z[k] + d;
        let v = f(&zp);
        zp[k] = z[k];
        v
    };
    let cols: Vec<DVector<f64>> = (0..z.len())
        .map(|k| ((at(k, h) - at(k, -h)) * 8.0 - (at(k, 2.0 * h) - at(k, -2.0 * h))) / (12.0 * h))
        .collect();
    DMatrix::from_columns(&cols)
}

/// `F_{p,t} o gamma` with difference Jacobians taken on the branch selected
/// by the base point.
struct FoldedChart<'a> {
    inner: &'a dyn LimitSurface,
    cap: &'a SphericalCap,
}

impl ParamSurface for FoldedChart<'_> {
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn eval(&self, z: &[f64]) -> DVector<f64> {
        let y = self.inner.eval(z);
        if self.cap.contains(&y) {
            y
        } else {
            self.cap.reflect_raw(&y)
        }
    }

    fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let y = self.inner.eval(z);
        let inside = self.cap.contains(&y);
        let speed = self.inner.jacobian(z).norm().max(1e-300);
        let h = DIFF_STEP * self.cap.reflection_length_scale(&y) / speed.max(1.0);
        stencil_jacobian(
            |p| {
                let y = self.inner.eval(p);
                if inside {
                    y
                } else {
                    self.cap.reflect_raw(&y)
                }
            },
            z,
            h,
        )
    }
}

struct MoebiusChart<'a> {
    inner: &'a dyn LimitSurface,
    x: &'a BallPoint,
}

impl ParamSurface for MoebiusChart<'_> {
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn eval(&self, z: &[f64]) -> DVector<f64> {
        moebius_raw(self.x.coords(), &self.inner.eval(z)).expect("|x| < 1 keeps the denominator positive")
    }

    fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let scale = (self.x.coords() + self.inner.eval(z)).norm().min(1.0);
        let speed = self.inner.jacobian(z).norm();
        stencil_jacobian(|p| self.eval(p), z, DIFF_STEP * scale / speed.max(1.0))
    }
}

fn weighted_curve_volume<W>(surface: &dyn ParamSurface, weight: W, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<AdaptiveEstimate>
where
    W: Fn(&DVector<f64>) -> f64,
{
    integrate_pieces(
        |s| {
            let jac = surface.jacobian(&[s]);
            Ok(weight(&surface.eval(&[s])) * area_element(&jac))
        },
        a,
        b,
        breaks,
        tol,
    )
}

fn check_surface(surface: &dyn LimitSurface, m: usize) -> Result<()> {
    if surface.ambient_dim() != m {
        return Err(Error::Domain(format!(
            "surface lives in R^{} but the map acts on R^{m}",
            surface.ambient_dim()
        )));
    }
    Ok(())
}

/// `tol` is relative to the bound. Volumes of `F_{p,t} o gamma` against `H_N(S^N) + H_N(gamma)`.
pub fn fold_limit_volume(surface: &dyn LimitSurface, p: &UnitVector, t_seq: &[f64], tol: f64) -> Result<LimitExperiment> {
    check_sequence(t_seq)?;
    check_surface(surface, p.dim())?;
    let n = surface.param_dim();
    if n + 1 >= surface.ambient_dim() {
        return Err(Error::Domain(format!(
            "fold limits need N < M (N = {n}, M = {})",
            surface.ambient_dim() - 1
        )));
    }
    let reference = surface_volume(surface, tol)?.value;
    let bound = sphere_volume(n) + reference;
    let abs_tol = tol * bound;
    let direct_tol = tol.max(DIRECT_TOL) * bound;
    let mut rows = Vec::with_capacity(t_seq.len());
    let mut direct_volumes = Vec::with_capacity(t_seq.len());
    for &t in t_seq {
        let cap = SphericalCap::new(p.clone(), t)?;
        let weight = |y: &DVector<f64>| cap.fold_conformal_factor(y).powi(n as i32);
        let folded = FoldedChart { inner: surface, cap: &cap };
        let (est, direct) = match surface.domain() {
            ParamDomain::Interval(a, b) => {
                let mut breaks = seam_crossings(surface, &cap, a, b);
                breaks.extend(graded_breaks(|s| weight(&surface.eval(&[s])), a, b));
                let est = weighted_curve_volume(surface, weight, a, b, &breaks, abs_tol)?;
                let direct = weighted_curve_volume(&folded, |_| 1.0, a, b, &breaks, direct_tol)?;
                (est, direct.value)
            }
            domain => {
                let wfn = |_: &[f64], y: &DVector<f64>| weight(y);
                let est = surface_measure_adaptive(surface, Some(&wfn), domain, abs_tol)?;
                let direct = surface_measure_adaptive(&folded, None, domain, direct_tol)?;
                (est, direct.value)
            }
        };
        rows.push(LimitRow {
            parameter: t,
            volume: est.value,
            bound,
            margin: bound - est.value,
            quad_error: est.error,
        });
        direct_volumes.push(direct);
    }
    Ok(LimitExperiment {
        surface: surface.label(),
        dimension: n,
        reference_volume: reference,
        rows,
        direct_volumes,
    })
}

/// Volumes of `T_x o omega` for `x = r * direction`, `r` in `r_seq`, against
/// `H_N(S^N)`. The weighted route uses the stretch factor
/// `((1 - |x|^2) / (1 + |x|^2 + 2 x.s))^N`.
pub fn moebius_limit_volume(
    surface: &dyn LimitSurface,
    direction: &UnitVector,
    r_seq: &[f64],
    tol: f64,
) -> Result<LimitExperiment> {
    check_sequence(r_seq)?;
    check_surface(surface, direction.dim())?;
    let n = surface.param_dim();
    let reference = surface_volume(surface, tol)?.value;
    let bound = sphere_volume(n);
    let abs_tol = tol * bound;
    let direct_tol = tol.max(DIRECT_TOL) * bound;
    let mut rows = Vec::with_capacity(r_seq.len());
    let mut direct_volumes = Vec::with_capacity(r_seq.len());
    for &r in r_seq {
        let x = BallPoint::along(direction, r)?;
        let weight = |y: &DVector<f64>| moebius_conformal_factor(x.coords(), y).powi(n as i32);
        let moved = MoebiusChart { inner: surface, x: &x };
        let (est, direct) = match surface.domain() {
            ParamDomain::Interval(a, b) => {
                let breaks = graded_breaks(|s| weight(&surface.eval(&[s])), a, b);
                let est = weighted_curve_volume(surface, weight, a, b, &breaks, abs_tol)?;
                let direct = weighted_curve_volume(&moved, |_| 1.0, a, b, &breaks, direct_tol)?;
                (est, direct.value)
            }
            domain => {
                let wfn = |_: &[f64], y: &DVector<f64>| weight(y);
                let est = surface_measure_adaptive(surface, Some(&wfn), domain, abs_tol)?;
                let direct = surface_measure_adaptive(&moved, None, domain, direct_tol)?;
                (est, direct.value)
            }
        };
        rows.push(LimitRow {
            parameter: r,
            volume: est.value,
            bound,
            margin: bound - est.value,
            quad_error: est.error,
        });
        direct_volumes.push(direct);
    }
    Ok(LimitExperiment {
        surface: surface.label(),
        dimension: n,
        reference_volume: reference,
        rows,
        direct_volumes,
    })
}

/// Shipped test surfaces, addressable by name.
pub fn shipped_surface(name: &str) -> Result<Box<dyn LimitSurface>> {
    let e = |m: usize, i: usize| UnitVector::basis(m, i);
    Ok(match name {
        // Through the north pole of S^2.
        "arc-north" => Box::new(GreatCircleArc::through(&e(3, 2), e(3, 0).coords(), 1.0)?),
        // Through the south pole of S^2.
        "arc-south" => Box::new(GreatCircleArc::through(&e(3, 2).neg(), e(3, 0).coords(), 1.0)?),
        // Along the equator of S^2, away from both poles.
        "arc-equator" => Box::new(GreatCircleArc::through(&e(3, 0), e(3, 1).coords(), 1.0)?),
        "veronese-patch" => Box::new(VeronesePatch { radius: 0.5 }),
        "flat-cap-1" => Box::new(FlatCap::new(e(2, 1), 3, 0.5)?),
        "flat-cap-2" => Box::new(FlatCap::new(e(3, 2), 4, 0.5)?),
        other => {
            return Err(Error::Domain(format!(
                "unknown surface '{other}' (known: {})",
                SHIPPED_SURFACES.join(", ")
            )))
        }
    })
}

/// Names accepted by [`shipped_surface`].
pub const SHIPPED_SURFACES: [&str; 6] = [
    "arc-north",
    "arc-south",
    "arc-equator",
    "veronese-patch",
    "flat-cap-1",
    "flat-cap-2",
];
