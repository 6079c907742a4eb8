use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use rpn_eigen::bounds::bound_constants;
use rpn_eigen::spectral::solve_generalized;
use rpn_eigen::sphere_geom::{moebius_apply, BallPoint, SphericalCap, UnitVector};
use rpn_eigen::veronese::veronese_apply;

fn unit(v: Vec<f64>) -> Option<UnitVector> {
    let d = DVector::from_vec(v);
    (d.norm() > 1e-3).then(|| UnitVector::from_direction(d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn moebius_inverse(y in prop::collection::vec(-1.0..1.0f64, 4), x in prop::collection::vec(-1.0..1.0f64, 4), r in 0.0..0.95f64) {
        let (Some(y), Some(dir)) = (unit(y), unit(x)) else { return Ok(()) };
        let x = BallPoint::along(&dir, r).unwrap();
        let z = moebius_apply(&x, &y).unwrap();
        prop_assert!((z.coords().norm() - 1.0).abs() < 1e-12);
        let back = moebius_apply(&x.neg(), &z).unwrap();
        prop_assert!((back.coords() - y.coords()).norm() < 1e-9);
    }

    #[test]
    fn cap_reflection_is_an_involution(y in prop::collection::vec(-1.0..1.0f64, 5), p in prop::collection::vec(-1.0..1.0f64, 5), t in 0.0..0.99f64) {
        let (Some(y), Some(p)) = (unit(y), unit(p)) else { return Ok(()) };
        let cap = SphericalCap::new(p, t).unwrap();
        let twice = cap.reflect(&cap.reflect(&y));
        prop_assert!((twice.coords() - y.coords()).norm() < 1e-9);
        prop_assert!(cap.contains(cap.fold(&y).coords()));
    }

    #[test]
    fn veronese_norm(x in prop::collection::vec(-2.0..2.0f64, 2..9)) {
        let n = x.len() - 1;
        let phi = veronese_apply(n, &x).unwrap();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((phi.norm() - r2).abs() <= 1e-12 * r2.max(1.0));
    }

    #[test]
    fn ratio_lemma_holds(n in 2usize..2000) {
        let p = bound_constants(n).unwrap();
        prop_assert!(p.holds());
        prop_assert!(p.a < p.b);
    }

    #[test]
    fn generalized_eigenpairs(seed in prop::collection::vec(-1.0..1.0f64, 36)) {
        let g = DMatrix::from_row_slice(6, 6, &seed);
        let a = &g * g.transpose();
        let b = g.transpose() * &g + DMatrix::identity(6, 6);
        let (vals, vecs) = solve_generalized(&a, &b).unwrap();
        prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for (k, &l) in vals.iter().enumerate() {
            let u = vecs.column(k);
            let res = &a * u - (&b * u) * l;
            prop_assert!(res.norm() < 1e-9 * (1.0 + l.abs()));
        }
        // B-orthonormal eigenvectors.
        let gram = vecs.transpose() * &b * &vecs;
        prop_assert!((gram - DMatrix::identity(6, 6)).amax() < 1e-10);
    }
}
