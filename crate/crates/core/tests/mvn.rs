use iclv_core::mvn::{
    bvn_cdf, halton_sequence, mvn_cdf_ghk, mvn_cdf_rect, std_normal_cdf, std_normal_quantile, MvnSpec, DEFAULT_SKIP,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spec2(r: f64) -> MvnSpec {
    MvnSpec::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0])).unwrap()
}

/// Random correlation matrix from a random factor.
fn correlation(raw: &[f64], d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(d, d, &raw[..d * d]);
    let c = &a * a.transpose() + DMatrix::identity(d, d) * 0.2;
    let s: Vec<f64> = (0..d).map(|i| c[(i, i)].sqrt()).collect();
    DMatrix::from_fn(d, d, |i, j| c[(i, j)] / (s[i] * s[j]))
}

#[test]
fn spec_examples() {
    let draws = halton_sequence(2, 1000, DEFAULT_SKIP).unwrap();
    let s1 = MvnSpec::standard(1);
    assert!((mvn_cdf_ghk(&s1, &[0.0], &draws).unwrap() - 0.5).abs() < 1e-12);
    assert!((mvn_cdf_ghk(&spec2(0.0), &[0.0, 0.0], &draws).unwrap() - 0.25).abs() < 1e-3);
    let orthant = 0.25 + 0.5f64.asin() / (2.0 * std::f64::consts::PI);
    assert!((mvn_cdf_ghk(&spec2(0.5), &[0.0, 0.0], &draws).unwrap() - orthant).abs() < 1e-3);
    let inf = f64::INFINITY;
    assert!((mvn_cdf_rect(&s1, &[-inf], &[inf], &draws).unwrap() - 1.0).abs() < 1e-15);
    let boxp = mvn_cdf_rect(&spec2(0.0), &[-1.0, -1.0], &[1.0, 1.0], &draws).unwrap();
    assert!((boxp - 0.466_064_9).abs() < 1e-3);
    assert_eq!(mvn_cdf_rect(&spec2(0.3), &[0.2, -1.0], &[0.2, 1.0], &draws).unwrap(), 0.0);
    assert!(mvn_cdf_rect(&spec2(0.3), &[0.3, -1.0], &[0.2, 1.0], &draws).is_err());
    assert!((std_normal_cdf(1.96) - 0.975_002_1).abs() < 1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn ghk_bivariate_matches_closed_form(r in -0.95f64..0.95, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let draws = halton_sequence(2, 1000, DEFAULT_SKIP).unwrap();
        let ghk = mvn_cdf_ghk(&spec2(r), &[a, b], &draws).unwrap();
        prop_assert!((ghk - bvn_cdf(a, b, r)).abs() < 1e-3);
    }

    #[test]
    fn ghk_is_monotone_in_upper(raw in prop::collection::vec(-1.0f64..1.0, 9), up in prop::collection::vec(-2.0f64..2.0, 3), k in 0usize..3, bump in 0.0f64..2.0) {
        let spec = MvnSpec::new(DVector::zeros(3), correlation(&raw, 3)).unwrap();
        let draws = halton_sequence(3, 300, DEFAULT_SKIP).unwrap();
        let base = mvn_cdf_ghk(&spec, &up, &draws).unwrap();
        let mut raised = up.clone();
        raised[k] += bump;
        prop_assert!(mvn_cdf_ghk(&spec, &raised, &draws).unwrap() >= base);
    }

    #[test]
    fn ghk_nearly_permutation_invariant(raw in prop::collection::vec(-1.0f64..1.0, 9), up in prop::collection::vec(-1.5f64..1.5, 3), mean in prop::collection::vec(-0.5f64..0.5, 3)) {
        let spec = MvnSpec::new(DVector::from_vec(mean), correlation(&raw, 3)).unwrap();
        let draws = halton_sequence(3, 1000, DEFAULT_SKIP).unwrap();
        let base = mvn_cdf_ghk(&spec, &up, &draws).unwrap();
        for perm in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
            let p = spec.permuted(&perm);
            let u: Vec<f64> = perm.iter().map(|&i| up[i]).collect();
            prop_assert!((mvn_cdf_ghk(&p, &u, &draws).unwrap() - base).abs() < 5e-3);
        }
    }

    #[test]
    fn ghk_is_deterministic(raw in prop::collection::vec(-1.0f64..1.0, 16), up in prop::collection::vec(-2.0f64..2.0, 4)) {
        let spec = MvnSpec::new(DVector::zeros(4), correlation(&raw, 4)).unwrap();
        let a = mvn_cdf_ghk(&spec, &up, &halton_sequence(4, 200, DEFAULT_SKIP).unwrap()).unwrap();
        let b = mvn_cdf_ghk(&spec, &up, &halton_sequence(4, 200, DEFAULT_SKIP).unwrap()).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn quantile_inverts_cdf(p in 1e-10f64..(1.0 - 1e-10)) {
        let x = std_normal_quantile(p).unwrap();
        prop_assert!((std_normal_cdf(x) - p).abs() < 1e-12);
    }

    #[test]
    fn halton_points_inside_unit_cube(d in 1usize..=20, n in 1usize..200, skip in 0usize..200) {
        let h = halton_sequence(d, n, skip).unwrap();
        prop_assert!(h.points().all(|p| p.iter().all(|&v| v > 0.0 && v < 1.0)));
    }
}
