//! Numerical integration on spheres, projective spaces, and parametric
//! surfaces.
//!
//! Sphere rules are tensor products of Gauss-Legendre rules in a polar
//! variable and uniform rules in the periodic angles. Every rule is
//! antipodally symmetric, so integrals over `RP^n` of even integrands are
//! half the corresponding integral over `S^n`.
//!
//! Reductions are always carried out sequentially in node order after a
//! (possibly parallel) evaluation pass, so results do not depend on the
//! number of threads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sphere_geom::UnitVector;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, exact for polynomials of
/// degree `2 * order - 1`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_order.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(order, x);
            deriv = dp;
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, dp) = legendre_with_derivative(order, x);
                deriv = dp;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if order == 0 {
        return (1.0, 0.0);
    }
    let dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Volume of the unit sphere `S^n`.
pub fn sphere_volume(n: usize) -> f64 {
    // Vol(S^n) = 2 pi^{(n+1)/2} / Gamma((n+1)/2), via the recursion
    // Vol(S^n) = 2 pi Vol(S^{n-2}) / (n - 1).
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI * sphere_volume(n - 2) / (n as f64 - 1.0),
    }
}

/// Volume of the round real projective space `RP^n`.
pub fn projective_volume(n: usize) -> f64 {
    0.5 * sphere_volume(n)
}

/// Nodes and weights on `S^n` with a declared polynomial exactness degree.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    n: usize,
    nodes: Vec<UnitVector>,
    weights: Vec<f64>,
    exactness_degree: usize,
}

impl QuadratureRule {
    /// Dimension of the sphere the rule lives on.
    pub fn sphere_dim(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[UnitVector] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exactness_degree(&self) -> usize {
        self.exactness_degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i f(y_i)` over `S^n`.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&UnitVector) -> f64 + Sync,
    {
        integrate(self, f)
    }

    /// Half the sphere integral: the integral over `RP^n` of an even function.
    pub fn integrate_projective<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&UnitVector) -> f64 + Sync,
    {
        Ok(0.5 * integrate(self, f)?)
    }
}

/// Product rule on `S^n`, `n` in `{1, 2, 3}`, exact for polynomials of total
/// degree `<= degree` in the ambient coordinates.
pub fn build_sphere_rule(n: usize, degree: usize) -> Result<QuadratureRule> {
    if degree < 2 {
        return Err(Error::Domain(format!("quadrature degree must be >= 2, got {degree}")));
    }
    // Uniform periodic rule: K points integrate trigonometric degree < K.
    let periodic = (degree + 1).next_multiple_of(2);
    let angles: Vec<f64> = (0..periodic)
        .map(|k| 2.0 * PI * (k as f64 + 0.5) / periodic as f64)
        .collect();
    let dphi = 2.0 * PI / periodic as f64;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match n {
        1 => {
            for &phi in &angles {
                nodes.push(UnitVector::renormalized(DVector::from_vec(vec![phi.cos(), phi.sin()])));
                weights.push(dphi);
            }
        }
        2 => {
            let (us, ws) = gauss_legendre(degree / 2 + 1);
            for (&u, &wu) in us.iter().zip(&ws) {
                let r = (1.0 - u * u).sqrt();
                for &phi in &angles {
                    nodes.push(UnitVector::renormalized(DVector::from_vec(vec![
                        r * phi.cos(),
                        r * phi.sin(),
                        u,
                    ])));
                    weights.push(wu * dphi);
                }
            }
        }
        3 => {
            // y = (sqrt(1-s) e^{i phi1}, sqrt(s) e^{i phi2}), dV = ds dphi1 dphi2 / 2.
            let (xs, ws) = gauss_legendre(degree / 4 + 1);
            for (&x, &wx) in xs.iter().zip(&ws) {
                let s = 0.5 * (x + 1.0);
                let ws = 0.5 * wx;
                let (c, d) = ((1.0 - s).sqrt(), s.sqrt());
                for &p1 in &angles {
                    for &p2 in &angles {
                        nodes.push(UnitVector::renormalized(DVector::from_vec(vec![
                            c * p1.cos(),
                            c * p1.sin(),
                            d * p2.cos(),
                            d * p2.sin(),
                        ])));
                        weights.push(0.5 * ws * dphi * dphi);
                    }
                }
            }
        }
        _ => {
            return Err(Error::Domain(format!(
                "sphere rules are available for n in {{1, 2, 3}}, got {n}"
            )))
        }
    }
    Ok(QuadratureRule {
        n,
        nodes,
        weights,
        exactness_degree: degree,
    })
}

/// Weighted sum `sum_i w_i f(y_i)`, evaluated in parallel and reduced in node
/// order.
pub fn integrate<F>(rule: &QuadratureRule, f: F) -> Result<f64>
where
    F: Fn(&UnitVector) -> f64 + Sync,
{
    let values: Vec<f64> = rule.nodes.par_iter().map(&f).collect();
    let mut total = 0.0;
    for ((value, weight), node) in values.iter().zip(&rule.weights).zip(&rule.nodes) {
        if !value.is_finite() {
            return Err(Error::Evaluation {
                node: node.as_slice().to_vec(),
                value: *value,
            });
        }
        total += weight * value;
    }
    Ok(total)
}

/// Vector-valued version of [`integrate`].
pub fn integrate_vector<F>(rule: &QuadratureRule, dim: usize, f: F) -> Result<DVector<f64>>
where
    F: Fn(&UnitVector) -> DVector<f64> + Sync,
{
    let values: Vec<DVector<f64>> = rule.nodes.par_iter().map(&f).collect();
    let mut total = DVector::zeros(dim);
    for ((value, weight), node) in values.iter().zip(&rule.weights).zip(&rule.nodes) {
        if let Some(bad) = value.iter().find(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                node: node.as_slice().to_vec(),
                value: *bad,
            });
        }
        total.axpy(*weight, value, 1.0);
    }
    Ok(total)
}

/// A smooth parametrized `N`-dimensional surface in a sphere `S^M`.
pub trait ParamSurface: Sync {
    /// Parameter dimension `N`.
    fn param_dim(&self) -> usize;

    /// Point of `S^M` (as a vector in `R^{M+1}`) at parameter `z`.
    fn eval(&self, z: &[f64]) -> DVector<f64>;

    /// Jacobian `(M+1) x N`; defaults to central differences.
    fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        central_difference_jacobian(|p| self.eval(p), z, 1e-6)
    }
}

/// Central-difference Jacobian of `f` at `z`.
pub fn central_difference_jacobian<F>(f: F, z: &[f64], h: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let mut zp = z.to_vec();
    let cols: Vec<DVector<f64>> = (0..z.len())
        .map(|k| {
            zp[k] = z[k] + h;
            let fwd = f(&zp);
            zp[k] = z[k] - h;
            let bwd = f(&zp);
            zp[k] = z[k];
            (fwd - bwd) / (2.0 * h)
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// `sqrt(det(J^T J))`, zero for a singular Jacobian.
pub fn area_element(jac: &DMatrix<f64>) -> f64 {
    let gram = jac.transpose() * jac;
    let det = gram.determinant();
    if det > 0.0 {
        det.sqrt()
    } else {
        0.0
    }
}

/// Fixed quadrature rule on a Euclidean parameter domain.
#[derive(Debug, Clone)]
pub struct DomainRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DomainRule {
    /// Gauss-Legendre rule on `[a, b]`.
    pub fn interval(a: f64, b: f64, order: usize) -> Self {
        Self::composite_interval(&[a, b], order)
    }

    /// Composite Gauss-Legendre rule over consecutive breakpoints.
    pub fn composite_interval(breaks: &[f64], order: usize) -> Self {
        let (xs, ws) = gauss_legendre(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            for (&x, &w) in xs.iter().zip(&ws) {
                nodes.push(vec![a + half * (x + 1.0)]);
                weights.push(w * half);
            }
        }
        Self { nodes, weights }
    }

    /// Tensor Gauss-Legendre rule on `[a0, a1] x [b0, b1]`.
    pub fn rectangle(a: (f64, f64), b: (f64, f64), order: (usize, usize)) -> Self {
        let ra = Self::interval(a.0, a.1, order.0);
        let rb = Self::interval(b.0, b.1, order.1);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (na, wa) in ra.nodes.iter().zip(&ra.weights) {
            for (nb, wb) in rb.nodes.iter().zip(&rb.weights) {
                nodes.push(vec![na[0], nb[0]]);
                weights.push(wa * wb);
            }
        }
        Self { nodes, weights }
    }

    /// Polar rule on the disk of the given radius: Gauss-Legendre in `r`
    /// (with the `r dr` factor), uniform in angle.
    pub fn disk(radius: f64, radial: usize, angular: usize) -> Self {
        let ra = Self::interval(0.0, radius, radial);
        let dphi = 2.0 * PI / angular as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (nr, wr) in ra.nodes.iter().zip(&ra.weights) {
            let r = nr[0];
            for k in 0..angular {
                let phi = dphi * (k as f64 + 0.5);
                nodes.push(vec![r * phi.cos(), r * phi.sin()]);
                weights.push(wr * r * dphi);
            }
        }
        Self { nodes, weights }
    }
}

/// Optional scalar weight `weight(z, surface_point)` for surface integrals.
pub type SurfaceWeight<'a> = &'a (dyn Fn(&[f64], &DVector<f64>) -> f64 + Sync);

/// `sum_i w_i weight(z_i) sqrt(det(DGamma^T DGamma))(z_i)`: the area of the
/// image counted with multiplicity.
pub fn surface_measure(
    surface: &dyn ParamSurface,
    weight: Option<SurfaceWeight<'_>>,
    rule: &DomainRule,
) -> Result<f64> {
    let values: Vec<f64> = rule
        .nodes
        .par_iter()
        .map(|z| surface_integrand(surface, weight, z))
        .collect();
    let mut total = 0.0;
    for ((value, w), z) in values.iter().zip(&rule.weights).zip(&rule.nodes) {
        if !value.is_finite() {
            return Err(Error::Evaluation {
                node: z.clone(),
                value: *value,
            });
        }
        total += w * value;
    }
    Ok(total)
}

fn surface_integrand(surface: &dyn ParamSurface, weight: Option<SurfaceWeight<'_>>, z: &[f64]) -> f64 {
    let jac = surface.jacobian(z);
    if jac.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    let element = area_element(&jac);
    match weight {
        None => element,
        Some(w) => {
            if element == 0.0 {
                0.0
            } else {
                w(z, &surface.eval(z)) * element
            }
        }
    }
}

/// Parameter domains understood by [`surface_measure_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamDomain {
    Interval(f64, f64),
    Rectangle((f64, f64), (f64, f64)),
    /// Disk of the given radius centred at the origin, integrated in polar
    /// coordinates.
    Disk(f64),
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveEstimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const ADAPTIVE_ORDER: usize = 10;

fn reference_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ADAPTIVE_ORDER))
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_panel<F>(f: &F, a: f64, b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (xs, ws) = reference_rule();
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (&x, &w) in xs.iter().zip(ws) {
        let z = a + half * (x + 1.0);
        let v = f(z)?;
        if !v.is_finite() {
            return Err(Error::Evaluation { node: vec![z], value: v });
        }
        sum += w * v;
    }
    Ok(sum * half)
}

/// Globally adaptive Gauss-Legendre integration of `f` over `[a, b]`.
///
/// Panels are bisected in order of decreasing error estimate (the difference
/// between a panel and its two halves) until the total estimate drops below
/// `tol` or the panel budget runs out. Discontinuities are handled by
/// refinement; the returned error estimate stays honest either way.
pub fn adaptive_integrate<F>(f: F, a: f64, b: f64, tol: f64, max_panels: usize) -> Result<AdaptiveEstimate>
where
    F: Fn(f64) -> Result<f64>,
{
    let refine = |a: f64, b: f64, coarse: f64| -> Result<(Panel, Panel)> {
        let mid = 0.5 * (a + b);
        let left = gauss_panel(&f, a, mid)?;
        let right = gauss_panel(&f, mid, b)?;
        let err = (left + right - coarse).abs();
        // Split the parent's error evenly; children get re-estimated when split.
        Ok((
            Panel { a, b: mid, value: left, error: 0.5 * err },
            Panel { a: mid, b, value: right, error: 0.5 * err },
        ))
    };
    let whole = gauss_panel(&f, a, b)?;
    let mut evaluations = ADAPTIVE_ORDER;
    let (l, r) = refine(a, b, whole)?;
    evaluations += 2 * ADAPTIVE_ORDER;
    let mut heap = BinaryHeap::from(vec![l, r]);
    let mut panels = 2;
    loop {
        let total_err: f64 = heap.iter().map(|p| p.error).sum();
        if total_err <= tol || panels >= max_panels {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        if worst.b - worst.a <= 1e-15 * (b - a).abs() {
            heap.push(Panel { error: 0.0, ..worst });
            continue;
        }
        let (l, r) = refine(worst.a, worst.b, worst.value)?;
        evaluations += 2 * ADAPTIVE_ORDER;
        heap.push(l);
        heap.push(r);
        panels += 1;
    }
    // Sum in left-to-right order for reproducibility.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    Ok(AdaptiveEstimate {
        value,
        error,
        evaluations,
    })
}

/// Adaptive version of [`surface_measure`] over an interval, rectangle, or
/// disk; two-dimensional domains use nested one-dimensional adaptivity.
pub fn surface_measure_adaptive(
    surface: &dyn ParamSurface,
    weight: Option<SurfaceWeight<'_>>,
    domain: ParamDomain,
    tol: f64,
) -> Result<AdaptiveEstimate> {
    let point = |z: &[f64]| -> Result<f64> {
        let v = surface_integrand(surface, weight, z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { node: z.to_vec(), value: v })
        }
    };
    const BUDGET_1D: usize = 20_000;
    const BUDGET_INNER: usize = 2_000;
    match domain {
        ParamDomain::Interval(a, b) => adaptive_integrate(|s| point(&[s]), a, b, tol, BUDGET_1D),
        ParamDomain::Rectangle((a0, a1), (b0, b1)) => {
            let inner_tol = tol / (4.0 * (a1 - a0).abs().max(1.0));
            let outer = |u: f64| -> Result<f64> {
                Ok(adaptive_integrate(|v| point(&[u, v]), b0, b1, inner_tol, BUDGET_INNER)?.value)
            };
            adaptive_integrate(outer, a0, a1, 0.5 * tol, BUDGET_INNER)
        }
        ParamDomain::Disk(radius) => {
            let inner_tol = tol / (4.0 * radius.max(1.0));
            let outer = |r: f64| -> Result<f64> {
                let ring = adaptive_integrate(
                    |phi| point(&[r * phi.cos(), r * phi.sin()]),
                    0.0,
                    2.0 * PI,
                    inner_tol / (2.0 * PI),
                    BUDGET_INNER,
                )?;
                Ok(r * ring.value)
            };
            adaptive_integrate(outer, 0.0, radius, 0.5 * tol, BUDGET_INNER)
        }
    }
}
