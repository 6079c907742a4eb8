//! Generalized Veronese maps `Phi_n : R^{n+1} -> R^{m(n)}`.
//!
//! `Phi_1(x_1, x_2) = (2 x_1 x_2, x_1^2 - x_2^2)` and for `n >= 2`
//!
//! ```text
//! Phi_n(x) = a_n ( Phi_{n-1}(x') / a_{n-1},  x_1 x_{n+1}, ..., x_n x_{n+1},
//!                  (|x'|^2 - n x_{n+1}^2) / (n a_n) )
//! ```
//!
//! with `x' = (x_1, ..., x_n)` and `a_n = sqrt(2(n+1)/n)`. On the unit sphere
//! the map is even, lands on `S^{m(n)-1}`, and is conformal with factor `a_n`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere_geom::{oriented_tangent_frame, UnitVector};

/// Constants attached to `Phi_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VeroneseConstants {
    pub n: usize,
    /// Conformal factor `sqrt(2(n+1)/n)`.
    pub a: f64,
    /// `sqrt(2(n-1)/n)`, the coefficient of the rank-one term in `DPhi^T DPhi`.
    pub b: f64,
    /// `sqrt(2/(n(n+1)))`.
    pub d: f64,
    /// Target dimension `n(n+3)/2`.
    pub m: usize,
}

const CACHED: usize = 64;

impl VeroneseConstants {
    fn compute(n: usize) -> Self {
        let nf = n as f64;
        Self {
            n,
            a: (2.0 * (nf + 1.0) / nf).sqrt(),
            b: (2.0 * (nf - 1.0) / nf).sqrt(),
            d: (2.0 / (nf * (nf + 1.0))).sqrt(),
            m: n * (n + 3) / 2,
        }
    }

    /// Constants for `Phi_n`, `n >= 1`.
    pub fn get(n: usize) -> Self {
        assert!(n >= 1, "Veronese maps are defined for n >= 1");
        static TABLE: OnceLock<Vec<VeroneseConstants>> = OnceLock::new();
        let table = TABLE.get_or_init(|| (1..=CACHED).map(Self::compute).collect());
        table.get(n - 1).copied().unwrap_or_else(|| Self::compute(n))
    }
}

/// Target dimension `m(n) = n(n+3)/2`.
pub fn target_dim(n: usize) -> usize {
    n * (n + 3) / 2
}

fn check_input(n: usize, len: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("Veronese maps need n >= 1".into()));
    }
    if len != n + 1 {
        return Err(Error::Domain(format!(
            "Phi_{n} takes vectors of length {}, got {len}",
            n + 1
        )));
    }
    Ok(())
}

/// Evaluates `Phi_n(x)` by the inductive formula.
pub fn veronese_apply(n: usize, x: &[f64]) -> Result<DVector<f64>> {
    check_input(n, x.len())?;
    let mut out = Vec::with_capacity(target_dim(n));
    apply_into(n, x, &mut out);
    Ok(DVector::from_vec(out))
}

fn apply_into(n: usize, x: &[f64], out: &mut Vec<f64>) {
    if n == 1 {
        out.push(2.0 * x[0] * x[1]);
        out.push(x[0] * x[0] - x[1] * x[1]);
        return;
    }
    let c = VeroneseConstants::get(n);
    let prev = VeroneseConstants::get(n - 1);
    let start = out.len();
    apply_into(n - 1, &x[..n], out);
    let scale = c.a / prev.a;
    for v in &mut out[start..] {
        *v *= scale;
    }
    let last = x[n];
    for &xi in &x[..n] {
        out.push(c.a * xi * last);
    }
    let head: f64 = x[..n].iter().map(|v| v * v).sum();
    out.push((head - n as f64 * last * last) / n as f64);
}

/// Analytic Jacobian `DPhi_n(x)`, an `m(n) x (n+1)` matrix, assembled by the
/// same induction as [`veronese_apply`].
pub fn veronese_jacobian(n: usize, x: &[f64]) -> Result<DMatrix<f64>> {
    check_input(n, x.len())?;
    let mut jac = DMatrix::zeros(target_dim(n), n + 1);
    jacobian_into(n, x, &mut jac, 0, 1.0);
    Ok(jac)
}

/// Writes `scale * DPhi_n(x)` into rows `row0..` and columns `0..=n`.
fn jacobian_into(n: usize, x: &[f64], jac: &mut DMatrix<f64>, row0: usize, scale: f64) {
    if n == 1 {
        jac[(row0, 0)] = scale * 2.0 * x[1];
        jac[(row0, 1)] = scale * 2.0 * x[0];
        jac[(row0 + 1, 0)] = scale * 2.0 * x[0];
        jac[(row0 + 1, 1)] = -scale * 2.0 * x[1];
        return;
    }
    let c = VeroneseConstants::get(n);
    let prev = VeroneseConstants::get(n - 1);
    // Upper block: (a_n / a_{n-1}) DPhi_{n-1}, last column zero.
    jacobian_into(n - 1, &x[..n], jac, row0, scale * c.a / prev.a);
    // Middle block: a_n (x_{n+1} I_n | x').
    let mid = row0 + prev.m;
    let last = x[n];
    for i in 0..n {
        jac[(mid + i, i)] = scale * c.a * last;
        jac[(mid + i, n)] = scale * c.a * x[i];
    }
    // Final row: (2/n) (x', -n x_{n+1}).
    let row = mid + n;
    for i in 0..n {
        jac[(row, i)] = scale * 2.0 * x[i] / n as f64;
    }
    jac[(row, n)] = -scale * 2.0 * last;
}

/// An oriented orthonormal tangent frame at `x` on `S^n` and its images under
/// `DPhi_n`.
#[derive(Debug, Clone)]
pub struct VeroneseTangentFrame {
    pub tangents: Vec<DVector<f64>>,
    pub images: Vec<DVector<f64>>,
}

/// Tangent frame at a unit vector `x` of length `n+1` together with its
/// pushforward; each image has length `a_n` and distinct images are
/// orthogonal.
pub fn veronese_tangent_frame(n: usize, x: &UnitVector) -> Result<VeroneseTangentFrame> {
    check_input(n, x.dim())?;
    let jac = veronese_jacobian(n, x.as_slice())?;
    let tangents = oriented_tangent_frame(x.coords());
    let images = tangents.iter().map(|u| &jac * u).collect();
    Ok(VeroneseTangentFrame { tangents, images })
}

/// Like [`veronese_tangent_frame`] but for a raw slice, which must have unit
/// norm within `1e-10`.
pub fn veronese_tangent_frame_slice(n: usize, x: &[f64]) -> Result<VeroneseTangentFrame> {
    let unit = UnitVector::from_slice(x)?;
    veronese_tangent_frame(n, &unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len).map(|_| 4.0 * (rng.random::<f64>() - 0.5)).collect()
    }

    #[test]
    fn constants() {
        for n in 1..=20 {
            let c = VeroneseConstants::get(n);
            assert!((c.a * c.a - c.b * c.b - 4.0 / n as f64).abs() < 1e-14);
            assert!((c.a * c.d - 2.0 / n as f64).abs() < 1e-15);
        }
        assert_eq!(VeroneseConstants::get(1).m, 2);
        assert_eq!(VeroneseConstants::get(2).m, 5);
        assert_eq!(VeroneseConstants::get(3).m, 9);
        assert_eq!(VeroneseConstants::get(1).a, 2.0);
        assert_eq!(VeroneseConstants::get(100).m, 5150);
    }

    #[test]
    fn phi1_is_complex_squaring() {
        let v = veronese_apply(1, &[1.0, 0.0]).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 1.0]);
        let v = veronese_apply(1, &[0.3, -0.7]).unwrap();
        assert!((v[0] + 0.42).abs() < 1e-15);
        assert!((v[1] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn phi2_matches_explicit_formula() {
        let v = veronese_apply(2, &[0.0, 0.0, 1.0]).unwrap();
        let expect = [0.0, 0.0, 0.0, 0.0, -1.0];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s3 = 3f64.sqrt();
        for _ in 0..50 {
            let x = random_vec(3, &mut rng);
            let (x1, x2, x3) = (x[0], x[1], x[2]);
            let explicit = [
                s3 * x1 * x2,
                s3 * 0.5 * (x1 * x1 - x2 * x2),
                s3 * x1 * x3,
                s3 * x2 * x3,
                0.5 * (x1 * x1 + x2 * x2 - 2.0 * x3 * x3),
            ];
            let v = veronese_apply(2, &x).unwrap();
            for (a, b) in v.iter().zip(explicit) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(veronese_apply(2, &[1.0, 0.0]).is_err());
        assert!(veronese_apply(0, &[1.0]).is_err());
        assert!(veronese_jacobian(3, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn norm_identity_and_evenness() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=8 {
            for _ in 0..1000 {
                let x = random_vec(n + 1, &mut rng);
                let sq: f64 = x.iter().map(|v| v * v).sum();
                let v = veronese_apply(n, &x).unwrap();
                assert!((v.norm() - sq).abs() <= 1e-12 * sq.max(1.0));
                let neg: Vec<f64> = x.iter().map(|v| -v).collect();
                let w = veronese_apply(n, &neg).unwrap();
                assert!((v - w).amax() <= 1e-15);
            }
        }
    }

    #[test]
    fn phi1_conformal_factor_is_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = random_vec(2, &mut rng);
            let j = veronese_jacobian(1, &x).unwrap();
            let g = j.transpose() * &j;
            let r2 = x[0] * x[0] + x[1] * x[1];
            assert!((g - DMatrix::identity(2, 2) * (4.0 * r2)).amax() < 1e-13);
        }
    }

    #[test]
    fn jacobian_gram_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=8 {
            let nf = n as f64;
            for _ in 0..200 {
                let x = random_vec(n + 1, &mut rng);
                let xv = DVector::from_column_slice(&x);
                let j = veronese_jacobian(n, &x).unwrap();
                let lhs = j.transpose() * &j;
                let rhs = DMatrix::identity(n + 1, n + 1) * (2.0 * (nf + 1.0) / nf * xv.norm_squared())
                    + &xv * xv.transpose() * (2.0 * (nf - 1.0) / nf);
                assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + xv.norm_squared()));
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for n in 1..=6 {
            for _ in 0..20 {
                let x = random_vec(n + 1, &mut rng);
                let j = veronese_jacobian(n, &x).unwrap();
                for k in 0..=n {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (veronese_apply(n, &xp).unwrap() - veronese_apply(n, &xm).unwrap())
                        / (2.0 * h);
                    let col = j.column(k);
                    assert!((fd - col).norm() <= 1e-6 * col.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn tangent_frame_conformality() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 1..=8 {
            let a2 = VeroneseConstants::get(n).a.powi(2);
            for _ in 0..50 {
                let x = UnitVector::random(n + 1, &mut rng);
                let frame = veronese_tangent_frame(n, &x).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        let g = frame.images[i].dot(&frame.images[j]);
                        let expect = if i == j { a2 } else { 0.0 };
                        assert!((g - expect).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn phi2_factor_is_sqrt3() {
        assert!((VeroneseConstants::get(2).a - 3f64.sqrt()).abs() < 1e-15);
        let x = UnitVector::basis(3, 2);
        let frame = veronese_tangent_frame(2, &x).unwrap();
        for img in &frame.images {
            assert!((img.norm() - 3f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn tangent_frame_needs_unit_input() {
        assert!(veronese_tangent_frame_slice(2, &[1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn injective_on_projective_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=4 {
            let mut margin = f64::INFINITY;
            for _ in 0..10_000 {
                let x = UnitVector::random(n + 1, &mut rng);
                let y = UnitVector::random(n + 1, &mut rng);
                let sep = (x.coords() - y.coords()).norm().min((x.coords() + y.coords()).norm());
                if sep < 1e-3 {
                    continue;
                }
                let d = (veronese_apply(n, x.as_slice()).unwrap()
                    - veronese_apply(n, y.as_slice()).unwrap())
                .norm();
                margin = margin.min(d / sep);
            }
            assert!(margin > 0.1, "n = {n}, margin {margin}");
        }
    }
}
