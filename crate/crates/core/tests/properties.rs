use curvgrf::covariance::CovarianceBundle;
use curvgrf::curvature::principal_curvatures;
use curvgrf::matops::*;
use curvgrf::validate::ks_statistic;
use curvgrf::{CorrelationModel, DensitySpec, DerivedConstants, PointJet};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn symmetric(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
        let a = DMatrix::from_vec(n, n, v);
        (&a + a.transpose()) * 0.5
    })
}

fn sized_symmetric() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=6).prop_flat_map(symmetric)
}

fn orthogonal(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n)
        .prop_filter("well conditioned", move |v| DMatrix::from_vec(n, n, v.clone()).determinant().abs() > 1e-3)
        .prop_map(move |v| DMatrix::from_vec(n, n, v).qr().q())
}

fn jet(n: usize) -> impl Strategy<Value = PointJet> {
    (prop::collection::vec(-3.0f64..3.0, n), symmetric(n))
        .prop_filter("non-degenerate gradient", |(g, _)| g.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|(g, h)| PointJet::new(DVector::from_vec(g), h))
}

proptest! {
    #[test]
    fn vech_round_trip(s in sized_symmetric()) {
        prop_assert_eq!(unvech(vech_of(&s).as_slice()), s);
    }

    #[test]
    fn duplication_maps_vech_to_vec(s in sized_symmetric()) {
        let n = s.nrows();
        let v = vec_of(&s);
        let h = vech_of(&s);
        prop_assert!((duplication_matrix(n) * &h - &v).amax() < 1e-12);
        prop_assert!((dup_pinv(n) * &v - &h).amax() < 1e-12);
    }

    #[test]
    fn commutation_transposes(n in 1usize..=6, seed in prop::collection::vec(-5.0f64..5.0, 36)) {
        let a = DMatrix::from_fn(n, n, |i, j| seed[i * 6 + j]);
        prop_assert_eq!(commutation_matrix(n) * vec_of(&a), vec_of(&a.transpose()));
    }

    #[test]
    fn hessian_covariance_is_rotation_invariant(r in (1usize..=4).prop_flat_map(orthogonal), rho4 in 0.1f64..5.0) {
        let n = r.nrows();
        let b = CovarianceBundle::build(n, DerivedConstants::new(-1.0, rho4, 1.0).unwrap());
        prop_assert!(b.rotation_invariance_check(&r).unwrap() < 1e-12 * rho4.max(1.0));
    }

    #[test]
    fn quadratic_form_reduces_to_eigenvalues(
        (r, lam) in (2usize..=4).prop_flat_map(|n| (orthogonal(n), prop::collection::vec(-5.0f64..5.0, n))),
    ) {
        let n = r.nrows();
        let b = CovarianceBundle::build(n, DerivedConstants::new(-1.0, 1.0, 1.0).unwrap());
        let (lhs, rhs) = b.quadratic_form_reduction(&r, &lam).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn curvatures_are_rotation_invariant((j, q) in (2usize..=5).prop_flat_map(|n| (jet(n), orthogonal(n)))) {
        let k = principal_curvatures(&j).unwrap().kappas;
        let rotated = PointJet::new(&q * &j.gradient, &q * &j.hessian * q.transpose());
        let kr = principal_curvatures(&rotated).unwrap().kappas;
        let scale = 1.0 + k.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in k.iter().zip(&kr) {
            prop_assert!((a - b).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn curvature_pdf_is_symmetric(k1 in -5.0f64..5.0, k2 in -5.0f64..5.0, l in 0.3f64..3.0) {
        let consts = CorrelationModel::gaussian(l, 1.0).unwrap().constants().unwrap();
        let s2 = DensitySpec::new(2, consts);
        prop_assert!((s2.curvature_pdf(&[k1]) - s2.curvature_pdf(&[-k1])).abs() <= 1e-15);
        let s3 = DensitySpec::new(3, consts);
        let a = s3.curvature_pdf(&[k1, k2]);
        prop_assert!((a - s3.curvature_pdf(&[k2, k1])).abs() <= 1e-14 * a.max(1e-300));
        prop_assert!((a - s3.curvature_pdf(&[-k1, -k2])).abs() <= 1e-14 * a.max(1e-300));
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn curvature_pdf_ignores_variance(k in -10.0f64..10.0, v in 1e-3f64..1e3) {
        let s = |var: f64| DensitySpec::new(2, CorrelationModel::gaussian(1.0, var).unwrap().constants().unwrap());
        let a = s(1.0).curvature_pdf(&[k]);
        prop_assert!(((s(v).curvature_pdf(&[k]) - a) / a).abs() < 1e-12);
    }

    #[test]
    fn n2_cdf_is_monotone(a in -20.0f64..20.0, d in 0.0f64..5.0, l in 0.3f64..3.0) {
        let s = DensitySpec::new(2, CorrelationModel::gaussian(l, 1.0).unwrap().constants().unwrap());
        let (lo, hi) = (s.curvature_cdf_1d(a).unwrap(), s.curvature_cdf_1d(a + d).unwrap());
        prop_assert!((0.0..=1.0).contains(&lo) && lo <= hi);
    }

    #[test]
    fn ks_statistic_is_a_distance(mut x in prop::collection::vec(-5.0f64..5.0, 10..200)) {
        x.sort_by(f64::total_cmp);
        let d = ks_statistic(&x, |v| 1.0 / (1.0 + (-v).exp())).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(d >= 0.5 / x.len() as f64);
    }
}
