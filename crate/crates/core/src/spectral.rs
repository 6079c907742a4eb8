//! Galerkin eigensolver for `-Laplacian` of a conformal metric `w g` on
//! `RP^n`, `n` in `{2, 3}`.
//!
//! The trial space consists of the real spherical harmonics of even degree
//! `<= L`, i.e. exactly the harmonics that descend to `RP^n`. Each degree
//! block is spanned by zonal harmonics `C_l^{((n-1)/2)}(x . xi_k)` about a
//! fixed set of directions `xi_k` and orthonormalized in `L^2(RP^n, g)`, so
//! the round stiffness matrix is `diag(l (l + n - 1))` and the round mass
//! matrix is the identity.
//!
//! For a conformal factor `w` the Dirichlet form and the mass are
//!
//! ```text
//! A_ij = int_{RP^n} w^{(n-2)/2} <grad Y_i, grad Y_j>_g dv_g
//! B_ij = int_{RP^n} w^{n/2} Y_i Y_j dv_g
//! ```
//!
//! and the generalized problem `A u = lambda B u` is reduced with a Cholesky
//! factor of `B` and a dense symmetric eigensolve.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{build_sphere_rule, projective_volume, QuadratureRule};
use crate::sphere_geom::UnitVector;

/// Dimension of the space of degree-`l` spherical harmonics on `S^n`.
pub fn harmonic_dim(n: usize, l: usize) -> usize {
    let binom = |a: usize, b: usize| -> usize {
        if b > a {
            return 0;
        }
        (0..b).fold(1usize, |acc, i| acc * (a - i) / (i + 1))
    };
    if l < 2 {
        return binom(l + n, n);
    }
    binom(l + n, n) - binom(l + n - 2, n)
}

/// Eigenvalue `l (l + n - 1)` of the round Laplacian on degree-`l` harmonics.
pub fn round_eigenvalue(n: usize, l: usize) -> f64 {
    (l * (l + n - 1)) as f64
}

/// Gegenbauer polynomial `C_k^{alpha}(t)` and its derivative.
fn gegenbauer(alpha: f64, k: usize, t: f64) -> (f64, f64) {
    fn value(alpha: f64, k: usize, t: f64) -> f64 {
        match k {
            0 => 1.0,
            _ => {
                let mut c0 = 1.0;
                let mut c1 = 2.0 * alpha * t;
                for j in 2..=k {
                    let jf = j as f64;
                    let c2 = (2.0 * t * (jf + alpha - 1.0) * c1 - (jf + 2.0 * alpha - 2.0) * c0) / jf;
                    c0 = c1;
                    c1 = c2;
                }
                c1
            }
        }
    }
    let v = value(alpha, k, t);
    let d = if k == 0 { 0.0 } else { 2.0 * alpha * value(alpha + 1.0, k - 1, t) };
    (v, d)
}

#[derive(Debug, Clone)]
struct HarmonicBlock {
    degree: usize,
    directions: Vec<DVector<f64>>,
    /// `directions.len() x dim`; column `i` expresses basis function `i` of the
    /// block in the zonal functions.
    coefficients: DMatrix<f64>,
}

/// Orthonormal basis of the even spherical harmonics of degree `<= L` on
/// `S^n`, normalized in `L^2(RP^n)`.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    n: usize,
    max_degree: usize,
    blocks: Vec<HarmonicBlock>,
    offsets: Vec<usize>,
    dim: usize,
}

impl HarmonicBasis {
    pub fn new(n: usize, max_degree: usize) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::Domain(format!("spectral work supports n in {{2, 3}}, got {n}")));
        }
        if max_degree % 2 == 1 {
            return Err(Error::Domain(format!("basis degree must be even, got {max_degree}")));
        }
        let rule = build_sphere_rule(n, 2 * max_degree + 2)?;
        let alpha = 0.5 * (n as f64 - 1.0);
        let mut blocks = Vec::new();
        let mut offsets = Vec::new();
        let mut dim = 0;
        for degree in (0..=max_degree).step_by(2) {
            offsets.push(dim);
            let block = Self::build_block(n, degree, alpha, &rule)?;
            dim += block.coefficients.ncols();
            blocks.push(block);
        }
        Ok(Self {
            n,
            max_degree,
            blocks,
            offsets,
            dim,
        })
    }

    fn build_block(n: usize, degree: usize, alpha: f64, rule: &QuadratureRule) -> Result<HarmonicBlock> {
        let target = harmonic_dim(n, degree);
        if degree == 0 {
            let normalizer = 1.0 / projective_volume(n).sqrt();
            return Ok(HarmonicBlock {
                degree,
                directions: vec![UnitVector::basis(n + 1, n).into_inner()],
                coefficients: DMatrix::from_element(1, 1, normalizer),
            });
        }
        let candidates = 2 * target + 4;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + 1000 * n as u64 + degree as u64);
        let directions: Vec<DVector<f64>> = (0..candidates)
            .map(|_| UnitVector::random(n + 1, &mut rng).into_inner())
            .collect();
        // Weighted zonal values, rows = nodes.
        let mut z = DMatrix::zeros(rule.len(), candidates);
        for (q, (node, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
            let sw = (0.5 * w).sqrt();
            for (k, xi) in directions.iter().enumerate() {
                z[(q, k)] = sw * gegenbauer(alpha, degree, node.coords().dot(xi)).0;
            }
        }
        let gram = z.transpose() * &z;
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..candidates).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let kept = eig.eigenvalues[order[target - 1]];
        let dropped = eig.eigenvalues[order[target]];
        if !(kept > 1e6 * dropped.abs().max(1e-300)) {
            return Err(Error::Numeric(format!(
                "zonal harmonics of degree {degree} do not span the harmonic space \
                 (kept {kept:.3e}, dropped {dropped:.3e})"
            )));
        }
        let mut coefficients = DMatrix::zeros(candidates, target);
        for (col, &idx) in order.iter().take(target).enumerate() {
            let scale = 1.0 / eig.eigenvalues[idx].sqrt();
            let mut v = eig.eigenvectors.column(idx).into_owned() * scale;
            // Deterministic sign: largest-magnitude entry positive.
            if v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m }) < 0.0 {
                v = -v;
            }
            coefficients.set_column(col, &v);
        }
        Ok(HarmonicBlock {
            degree,
            directions,
            coefficients,
        })
    }

    pub fn sphere_dim(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.dim == 0
    }

    /// Degree of every basis function, in basis order.
    pub fn degrees(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.degree, b.coefficients.ncols()))
            .collect()
    }

    /// Global position of `(degree, index)` in the basis.
    pub fn position(&self, degree: usize, index: usize) -> Result<usize> {
        if degree % 2 == 1 || degree > self.max_degree {
            return Err(Error::Domain(format!(
                "harmonic degree {degree} is not an even degree <= {}",
                self.max_degree
            )));
        }
        let b = degree / 2;
        let size = self.blocks[b].coefficients.ncols();
        if index >= size {
            return Err(Error::Domain(format!(
                "harmonic index {index} out of range for degree {degree} (dimension {size})"
            )));
        }
        Ok(self.offsets[b] + index)
    }

    /// Values of all basis functions at `y`.
    pub fn eval(&self, y: &DVector<f64>) -> DVector<f64> {
        let alpha = 0.5 * (self.n as f64 - 1.0);
        let mut out = DVector::zeros(self.dim);
        for (block, &offset) in self.blocks.iter().zip(&self.offsets) {
            let zonal = DVector::from_iterator(
                block.directions.len(),
                block.directions.iter().map(|xi| gegenbauer(alpha, block.degree, y.dot(xi)).0),
            );
            let vals = block.coefficients.tr_mul(&zonal);
            out.rows_mut(offset, vals.len()).copy_from(&vals);
        }
        out
    }

    /// Values and tangential gradients (`(n+1) x len` matrix) at a unit `y`.
    pub fn eval_with_gradients(&self, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let alpha = 0.5 * (self.n as f64 - 1.0);
        let ambient = self.n + 1;
        let mut values = DVector::zeros(self.dim);
        let mut grads = DMatrix::zeros(ambient, self.dim);
        for (block, &offset) in self.blocks.iter().zip(&self.offsets) {
            let k = block.directions.len();
            let mut zonal = DVector::zeros(k);
            // Column j = tangential gradient of zonal function j.
            let mut zgrad = DMatrix::zeros(ambient, k);
            for (j, xi) in block.directions.iter().enumerate() {
                let t = y.dot(xi);
                let (v, d) = gegenbauer(alpha, block.degree, t);
                zonal[j] = v;
                let tangent = xi - y * t;
                zgrad.set_column(j, &(tangent * d));
            }
            let vals = block.coefficients.tr_mul(&zonal);
            let g = &zgrad * &block.coefficients;
            values.rows_mut(offset, vals.len()).copy_from(&vals);
            grads.columns_mut(offset, g.ncols()).copy_from(&g);
        }
        (values, grads)
    }
}

/// One term `coefficient * Y_{degree, index}` of an exponent field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub degree: usize,
    pub index: usize,
    pub coefficient: f64,
}

/// How the exponent field of a conformal factor is described.
#[derive(Debug, Clone)]
pub enum FactorShape {
    /// `w = 1`.
    Round,
    /// `w = exp(eps (y_{n+1}^2 - 1/(n+1)))`.
    Zonal { eps: f64 },
    /// `w = exp(sum_k c_k Y_{l_k, i_k})` over even-degree harmonics.
    Harmonic {
        terms: Vec<HarmonicTerm>,
        basis: Arc<HarmonicBasis>,
    },
}

/// A positive even function `w = scale * exp(u)` on `S^n`, defining the
/// metric `w g` on `RP^n`.
#[derive(Debug, Clone)]
pub struct ConformalFactor {
    n: usize,
    shape: FactorShape,
    scale: f64,
}

impl ConformalFactor {
    pub fn round(n: usize) -> Self {
        Self {
            n,
            shape: FactorShape::Round,
            scale: 1.0,
        }
    }

    pub fn zonal(n: usize, eps: f64) -> Self {
        Self {
            n,
            shape: FactorShape::Zonal { eps },
            scale: 1.0,
        }
    }

    /// `w = exp(sum of terms)`; degrees must be even.
    pub fn from_harmonic_terms(n: usize, terms: Vec<HarmonicTerm>) -> Result<Self> {
        let max_degree = terms.iter().map(|t| t.degree).max().unwrap_or(0);
        if let Some(bad) = terms.iter().find(|t| t.degree % 2 == 1) {
            return Err(Error::Domain(format!(
                "conformal factor terms must have even degree, got {}",
                bad.degree
            )));
        }
        let basis = Arc::new(HarmonicBasis::new(n, max_degree.max(2))?);
        for t in &terms {
            basis.position(t.degree, t.index)?;
        }
        Ok(Self {
            n,
            shape: FactorShape::Harmonic { terms, basis },
            scale: 1.0,
        })
    }

    /// Multiplies the factor by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("conformal scale must be positive, got {s}")));
        }
        Ok(Self {
            scale: self.scale * s,
            ..self.clone()
        })
    }

    pub fn sphere_dim(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> &FactorShape {
        &self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_round(&self) -> bool {
        matches!(self.shape, FactorShape::Round)
    }

    /// The exponent field `u` with `w = scale * exp(u)`.
    pub fn exponent(&self, y: &DVector<f64>) -> f64 {
        match &self.shape {
            FactorShape::Round => 0.0,
            FactorShape::Zonal { eps } => {
                let last = y[self.n];
                eps * (last * last - 1.0 / (self.n as f64 + 1.0))
            }
            FactorShape::Harmonic { terms, basis } => {
                let vals = basis.eval(y);
                terms
                    .iter()
                    .map(|t| {
                        let idx = basis.position(t.degree, t.index).expect("validated at construction");
                        t.coefficient * vals[idx]
                    })
                    .sum()
            }
        }
    }

    pub fn eval(&self, y: &DVector<f64>) -> f64 {
        self.scale * self.exponent(y).exp()
    }

    /// `Vol(RP^n, w g) = int w^{n/2} dv_g`.
    pub fn volume(&self, rule: &QuadratureRule) -> Result<f64> {
        let half_n = 0.5 * self.n as f64;
        rule.integrate_projective(|y| self.eval(y.coords()).powf(half_n))
    }
}

/// Rescales `w` so that `Vol(RP^n, w g) = Vol(RP^n, g)`.
pub fn normalize_volume(w: &ConformalFactor, n: usize, rule: &QuadratureRule) -> Result<ConformalFactor> {
    if w.sphere_dim() != n || rule.sphere_dim() != n {
        return Err(Error::Domain(format!(
            "dimension mismatch: factor on S^{}, rule on S^{}, requested n = {n}",
            w.sphere_dim(),
            rule.sphere_dim()
        )));
    }
    if let Some(bad) = rule.nodes().iter().find(|y| !(w.eval(y.coords()) > 0.0)) {
        return Err(Error::Domain(format!(
            "conformal factor is not positive at {:?}",
            bad.as_slice()
        )));
    }
    let volume = w.volume(rule)?;
    let s = (projective_volume(n) / volume).powf(2.0 / n as f64);
    w.scaled(s)
}

/// Default quadrature degree for a basis of degree `L`.
pub fn default_rule_degree(basis_degree: usize) -> usize {
    2 * basis_degree + 8
}

/// Default basis degree per dimension.
pub fn default_basis_degree(n: usize) -> usize {
    if n == 2 {
        8
    } else {
        6
    }
}

/// The basis tabulated on a quadrature rule, reusable across conformal
/// factors.
#[derive(Debug, Clone)]
pub struct GalerkinSpace {
    n: usize,
    basis: Arc<HarmonicBasis>,
    rule: QuadratureRule,
    /// `nodes x dim`.
    values: DMatrix<f64>,
    /// `(n+1) x dim` per node.
    gradients: Vec<DMatrix<f64>>,
}

impl GalerkinSpace {
    pub fn new(n: usize, basis_degree: usize, rule: QuadratureRule) -> Result<Self> {
        if basis_degree < 2 || basis_degree % 2 == 1 {
            return Err(Error::Domain(format!(
                "basis degree must be even and >= 2, got {basis_degree}"
            )));
        }
        if rule.sphere_dim() != n {
            return Err(Error::Domain("quadrature rule lives on the wrong sphere".into()));
        }
        if rule.exactness_degree() < 2 * basis_degree + 2 {
            return Err(Error::Domain(format!(
                "quadrature degree {} is too low for basis degree {basis_degree} (need >= {})",
                rule.exactness_degree(),
                2 * basis_degree + 2
            )));
        }
        let basis = Arc::new(HarmonicBasis::new(n, basis_degree)?);
        let tabulated: Vec<(DVector<f64>, DMatrix<f64>)> = rule
            .nodes()
            .par_iter()
            .map(|y| basis.eval_with_gradients(y.coords()))
            .collect();
        let mut values = DMatrix::zeros(rule.len(), basis.len());
        let mut gradients = Vec::with_capacity(rule.len());
        for (q, (v, g)) in tabulated.into_iter().enumerate() {
            values.set_row(q, &v.transpose());
            gradients.push(g);
        }
        Ok(Self {
            n,
            basis,
            rule,
            values,
            gradients,
        })
    }

    /// Space with the default rule degree `2 L + 8`.
    pub fn with_default_rule(n: usize, basis_degree: usize) -> Result<Self> {
        let rule = build_sphere_rule(n, default_rule_degree(basis_degree))?;
        Self::new(n, basis_degree, rule)
    }

    pub fn sphere_dim(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &Arc<HarmonicBasis> {
        &self.basis
    }

    pub fn basis_degree(&self) -> usize {
        self.basis.max_degree()
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Basis values at node `q`.
    pub fn node_values(&self, q: usize) -> DVector<f64> {
        self.values.row(q).transpose()
    }

    pub fn node_gradients(&self, q: usize) -> &DMatrix<f64> {
        &self.gradients[q]
    }

    /// Stiffness and mass matrices for the metric `w g`.
    pub fn assemble(&self, w: &ConformalFactor) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if w.sphere_dim() != self.n {
            return Err(Error::Domain("conformal factor lives on the wrong sphere".into()));
        }
        let ambient = self.n + 1;
        let half_n = 0.5 * self.n as f64;
        let dim = self.basis.len();
        let mut stiff_rows = DMatrix::zeros(self.rule.len() * ambient, dim);
        let mut mass_rows = DMatrix::zeros(self.rule.len(), dim);
        for (q, (node, qw)) in self.rule.nodes().iter().zip(self.rule.weights()).enumerate() {
            let wv = w.eval(node.coords());
            if !(wv > 0.0 && wv.is_finite()) {
                return Err(Error::Evaluation {
                    node: node.as_slice().to_vec(),
                    value: wv,
                });
            }
            let mass_weight = (0.5 * qw * wv.powf(half_n)).sqrt();
            let stiff_weight = (0.5 * qw * wv.powf(half_n - 1.0)).sqrt();
            mass_rows.set_row(q, &(self.values.row(q) * mass_weight));
            stiff_rows
                .rows_mut(q * ambient, ambient)
                .copy_from(&(&self.gradients[q] * stiff_weight));
        }
        let a = stiff_rows.tr_mul(&stiff_rows);
        let b = mass_rows.tr_mul(&mass_rows);
        Ok((symmetrize(a), symmetrize(b)))
    }

    /// The `k` smallest eigenvalues of `-Laplacian_{w g}` with multiplicity.
    pub fn solve(&self, w: &ConformalFactor, k: usize) -> Result<EigenResult> {
        let (a, b) = self.assemble(w)?;
        let (eigenvalues, eigenvectors) = solve_generalized(&a, &b)?;
        let k = k.min(eigenvalues.len());
        Ok(EigenResult {
            n: self.n,
            basis_degree: self.basis_degree(),
            eigenvalues: eigenvalues[..k].to_vec(),
            eigenvectors: eigenvectors.columns(0, k).into_owned(),
            basis: Arc::clone(&self.basis),
        })
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Solves `A u = lambda B u` for symmetric `A` and symmetric positive
/// definite `B`. Returns ascending eigenvalues and `B`-orthonormal
/// eigenvectors (columns).
pub fn solve_generalized(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = a.nrows();
    let chol = Cholesky::new(b.clone()).ok_or_else(|| {
        let diag = b.diagonal();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        Error::Numeric(format!(
            "mass matrix is not positive definite (diagonal range [{lo:.3e}, {hi:.3e}])"
        ))
    })?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let la = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&la.transpose())
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let eig = SymmetricEigen::try_new(symmetrize(c), 1e-15, 10_000)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let sorted = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    let vectors = l
        .transpose()
        .solve_upper_triangular(&sorted)
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    Ok((values, vectors))
}

/// Sorted Galerkin eigenvalues and eigenvectors in the harmonic basis.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub n: usize,
    pub basis_degree: usize,
    /// Ascending, repeated according to multiplicity; `eigenvalues[0]` is the
    /// constant mode.
    pub eigenvalues: Vec<f64>,
    /// Columns are `B`-orthonormal coefficient vectors.
    pub eigenvectors: DMatrix<f64>,
    pub basis: Arc<HarmonicBasis>,
}

impl EigenResult {
    /// The `k`-th eigenvalue counted with multiplicity (`k = 0` is zero).
    pub fn lambda(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    /// Distinct eigenvalues with multiplicities, grouping values within
    /// `tol * max(1, |lambda|)`.
    pub fn clusters(&self, tol: f64) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &v in &self.eigenvalues {
            match out.last_mut() {
                Some((rep, count)) if (v - *rep).abs() <= tol * rep.abs().max(1.0) => *count += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }

    /// The eigenfunction of column `k` as a scalar field.
    pub fn eigenfunction(&self, k: usize) -> ScalarField {
        ScalarField {
            coefficients: self.eigenvectors.column(k).into_owned(),
            basis: Arc::clone(&self.basis),
        }
    }
}

/// A function on `RP^n` expanded in the even-harmonic basis.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub coefficients: DVector<f64>,
    pub basis: Arc<HarmonicBasis>,
}

impl ScalarField {
    pub fn eval(&self, y: &DVector<f64>) -> f64 {
        self.basis.eval(y).dot(&self.coefficients)
    }

    /// Tangential gradient at a unit `y`.
    pub fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        let (_, grads) = self.basis.eval_with_gradients(y);
        grads * &self.coefficients
    }

    /// A field whose every coefficient is zero.
    pub fn zero(basis: Arc<HarmonicBasis>) -> Self {
        Self {
            coefficients: DVector::zeros(basis.len()),
            basis,
        }
    }
}

/// `normalize_volume` then assemble on a space with the given rule.
pub fn assemble_matrices(
    w: &ConformalFactor,
    n: usize,
    basis_degree: usize,
    rule: &QuadratureRule,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let space = GalerkinSpace::new(n, basis_degree, rule.clone())?;
    if w.sphere_dim() != n {
        return Err(Error::Domain("conformal factor lives on the wrong sphere".into()));
    }
    space.assemble(w)
}

/// The `k` smallest eigenvalues of `-Laplacian_{w g}` on `RP^n` using the
/// default quadrature for basis degree `L`.
pub fn eigenvalues(w: &ConformalFactor, n: usize, basis_degree: usize, k: usize) -> Result<EigenResult> {
    if w.sphere_dim() != n {
        return Err(Error::Domain("conformal factor lives on the wrong sphere".into()));
    }
    GalerkinSpace::with_default_rule(n, basis_degree)?.solve(w, k)
}

/// A `B`-normalized eigenfunction for `lambda_1(w)`; for a degenerate
/// `lambda_1` this is the first returned vector of the eigenspace.
pub fn first_excited_state(res: &EigenResult) -> Result<ScalarField> {
    if res.eigenvalues.len() < 2 {
        return Err(Error::Domain("need at least two eigenpairs".into()));
    }
    Ok(res.eigenfunction(1))
}

/// Round-sphere check value: `Vol(RP^2) = 2 pi`.
pub const RP2_VOLUME: f64 = 2.0 * PI;
