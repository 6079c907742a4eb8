use nalgebra::{DMatrix, DVector};

use rpn_eigen::degree_lab::{
    change_of_variables_check, cov_example, degree_both, degree_integral, degree_regular_value,
    generic_target, homotopy_spot_check, mirrored_map, reflection_symmetry_check, standard_minus_point,
    standard_region, EuclideanMap, SphereSelfMap, DEFAULT_RESOLUTION,
};
use rpn_eigen::sphere_geom::UnitVector;
use rpn_eigen::Error;

#[test]
fn linear_maps_have_sign_of_determinant() {
    // A rotation composed with a reflection of one coordinate: determinant -1.
    let (c, s) = (0.6f64, 0.8f64);
    let m = DMatrix::from_row_slice(4, 4, &[c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let map = SphereSelfMap::linear("rot-refl", m).unwrap();
    let rep = degree_both(&map, DEFAULT_RESOLUTION, &generic_target(3, 2), 128, 2).unwrap();
    assert_eq!(rep.integral.degree, -1);
    assert_eq!(rep.count.preimages.len(), 1);
}

#[test]
fn identity_has_one_positive_preimage() {
    let map = SphereSelfMap::named("identity", 3).unwrap();
    let target = generic_target(3, 11);
    let count = degree_regular_value(&map, &target, 64, 11).unwrap();
    assert_eq!(count.preimages.len(), 1);
    assert_eq!(count.preimages[0].sign, 1);
    let p = DVector::from_column_slice(&count.preimages[0].point);
    assert!((p - target.coords()).norm() < 1e-11);
}

#[test]
fn flip_b_preimage_is_the_linear_solve() {
    let map = SphereSelfMap::named("flip-b", 3).unwrap();
    let target = UnitVector::from_direction(DVector::from_vec(vec![0.1, 0.5, -0.3, 0.7])).unwrap();
    let count = degree_regular_value(&map, &target, 64, 4).unwrap();
    assert_eq!(count.preimages.len(), 1);
    let expect = DVector::from_vec(vec![0.1, 0.5, 0.3, -0.7]).normalize();
    assert!((DVector::from_column_slice(&count.preimages[0].point) - expect).norm() < 1e-11);
    assert_eq!(count.degree, 1);
}

#[test]
fn warped_symmetric_map_has_degree_one() {
    let map = SphereSelfMap::named("flip-b-warped", 3).unwrap();
    assert!(reflection_symmetry_check(&map, 1, 300, 8).unwrap().passed);
    let rep = degree_both(&map, DEFAULT_RESOLUTION, &generic_target(3, 8), 256, 8).unwrap();
    assert_eq!(rep.integral.degree, 1);
    assert!(rep.integral.distance < 0.01, "{}", rep.integral.distance);
}

#[test]
fn homotopy_keeps_degree() {
    let path = homotopy_spot_check(10, DEFAULT_RESOLUTION).unwrap();
    assert_eq!(path.len(), 11);
    assert!(path.iter().all(|&(_, d)| d == 1));
}

#[test]
fn symmetry_check_needs_odd_sphere() {
    let map = SphereSelfMap::named("identity", 2).unwrap();
    assert!(reflection_symmetry_check(&map, 1, 10, 0).is_err());
    assert!(SphereSelfMap::named("flip-b", 2).is_err());
    assert!(SphereSelfMap::named("double-angle", 3).is_err());
}

#[test]
fn change_of_variables_examples() {
    let region = standard_region();
    // (name, d(phi, D_-, 0)); the affine matrix has determinant -2.15.
    for (name, expect) in [("affine", -1), ("no-zeros", 0), ("flip-b-shifted", 1), ("square-a", 2)] {
        let rep = change_of_variables_check(&cov_example(name).unwrap(), &region, 6).unwrap();
        assert_eq!(rep.degree_minus, expect, "{name}");
        assert_eq!(rep.degree_plus, -expect, "{name}");
        assert_eq!(rep.factor, -1);
        assert!(rep.holds);
    }
    let rep = change_of_variables_check(&cov_example("square-a").unwrap(), &region, 6).unwrap();
    assert_eq!(rep.zeros_minus.len(), 2);
    assert!(rep.zeros_minus.iter().all(|z| z.sign == 1));
}

#[test]
fn psi_zero_is_the_mirrored_zero() {
    let region = standard_region();
    let phi = cov_example("affine").unwrap();
    let psi = mirrored_map(&phi, &region);
    let x = region.mirror(&standard_minus_point()).unwrap();
    assert!(psi.eval(&x).norm() < 1e-14);
}

#[test]
fn boundary_zero_is_rejected() {
    let region = standard_region();
    let x0 = region.mirror(&DVector::from_vec(vec![1.0, 0.2, 0.1, 0.8])).unwrap();
    let phi = EuclideanMap::affine("face", DMatrix::identity(4, 4), x0);
    assert!(matches!(change_of_variables_check(&phi, &region, 4), Err(Error::IllPosed(_))));
}

#[test]
fn resolution_error_reports_distance() {
    let map = SphereSelfMap::new(1, "wobble", |x| {
        let a = x[1].atan2(x[0]);
        let th = 3.0 * a + 0.1 * (18.0 * a).sin();
        DVector::from_vec(vec![th.cos(), th.sin()])
    });
    match degree_integral(&map, 4) {
        Err(Error::Resolution { distance, .. }) => assert!(distance > 0.05),
        other => panic!("{other:?}"),
    }
    assert_eq!(degree_integral(&map, 40).unwrap().degree, 3);
}
