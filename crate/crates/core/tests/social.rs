use iclv_core::social::{
    build_weight_matrix, geodesic_distance, AttributeValue, GeoPoint, GowerScale, IndividualProfile, TieMetric,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn profile(i: usize, age: f64, income: f64, gender: u8, edu: u8, lat: f64, lon: f64) -> IndividualProfile {
    IndividualProfile {
        id: (i + 1).to_string(),
        zip_centroid: Some(GeoPoint { lat, lon }),
        attributes: vec![
            ("age".into(), AttributeValue::Continuous(age)),
            ("income".into(), AttributeValue::Continuous(income)),
            ("gender".into(), AttributeValue::Categorical(gender.to_string())),
            ("education".into(), AttributeValue::Categorical(edu.to_string())),
        ],
    }
}

fn profiles_strategy(min: usize, max: usize) -> impl Strategy<Value = Vec<IndividualProfile>> {
    prop::collection::vec(
        (18.0f64..80.0, 10.0f64..200.0, 0u8..2, 0u8..4, 35.0f64..37.0, -88.0f64..-86.0),
        min..max,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (a, inc, g, e, lat, lon))| profile(i, a, inc, g, e, lat, lon))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rows_are_stochastic_with_exactly_k_ties(ps in profiles_strategy(2, 40), k in 1usize..8, spatial in any::<bool>()) {
        let metric = if spatial { TieMetric::Spatial } else { TieMetric::Gower };
        let w = build_weight_matrix(&ps, metric, k, None).unwrap();
        let q = ps.len();
        let kk = k.min(q - 1);
        prop_assert_eq!(w.nnz(), q * kk);
        for (i, row) in w.rows().iter().enumerate() {
            prop_assert_eq!(row.len(), kk);
            prop_assert!(row.iter().all(|&(j, v)| j != i && v >= 0.0));
            prop_assert!((row.iter().map(|t| t.1).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spatial_system_is_solvable(ps in profiles_strategy(3, 30), k in 1usize..5) {
        let w = build_weight_matrix(&ps, TieMetric::Spatial, k, None).unwrap();
        let q = ps.len();
        let b: Vec<f64> = (0..q).map(|i| (i as f64).sin()).collect();
        for delta in [0.1, 0.5, 0.9] {
            let x = w.solve_spatial(delta, &b).unwrap();
            let a = DMatrix::identity(q, q) - w.to_dense() * delta;
            let resid = &a * DVector::from_vec(x) - DVector::from_vec(b.clone());
            prop_assert!(resid.amax() < 1e-8);
        }
    }

    #[test]
    fn gower_is_symmetric_and_bounded(ps in profiles_strategy(2, 30)) {
        let scale = GowerScale::fit(&ps, None).unwrap();
        for a in &ps {
            for b in &ps {
                let d = scale.dissimilarity(a, b).unwrap();
                prop_assert!((0.0..=1.0).contains(&d));
                prop_assert_eq!(d, scale.dissimilarity(b, a).unwrap());
            }
        }
    }

    #[test]
    fn geodesic_is_symmetric(a in (-90.0f64..90.0, -180.0f64..180.0), b in (-90.0f64..90.0, -180.0f64..180.0)) {
        let p1 = GeoPoint { lat: a.0, lon: a.1 };
        let p2 = GeoPoint { lat: b.0, lon: b.1 };
        let d = geodesic_distance(p1, p2).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - geodesic_distance(p2, p1).unwrap()).abs() < 1e-9);
    }
}

/// Brute-force k nearest by scanning the full dissimilarity matrix.
fn brute_force(d: &DMatrix<f64>, ids: &[usize], k: usize) -> Vec<Vec<usize>> {
    (0..d.nrows())
        .map(|i| {
            let mut c: Vec<usize> = (0..d.nrows()).filter(|&j| j != i).collect();
            c.sort_by(|&x, &y| d[(i, x)].partial_cmp(&d[(i, y)]).unwrap().then(ids[x].cmp(&ids[y])));
            let mut top = c[..k].to_vec();
            top.sort();
            top
        })
        .collect()
}

#[test]
fn six_profiles_match_brute_force_neighbours() {
    let ps: Vec<IndividualProfile> = (0..6)
        .map(|i| {
            let f = i as f64;
            profile(i, 20.0 + 9.0 * f, 40.0 + (f * 1.7).sin() * 30.0, (i % 2) as u8, (i % 3) as u8, 36.0 + 0.1 * f * f, -86.5 + 0.07 * f)
        })
        .collect();
    let ids: Vec<usize> = (1..=6).collect();
    let scale = GowerScale::fit(&ps, None).unwrap();
    for k in [1, 2, 3, 5] {
        let dg = DMatrix::from_fn(6, 6, |i, j| scale.dissimilarity(&ps[i], &ps[j]).unwrap());
        let ds = DMatrix::from_fn(6, 6, |i, j| {
            geodesic_distance(ps[i].zip_centroid.unwrap(), ps[j].zip_centroid.unwrap()).unwrap()
        });
        for (metric, d) in [(TieMetric::Gower, dg), (TieMetric::Spatial, ds)] {
            let w = build_weight_matrix(&ps, metric, k, None).unwrap();
            let expect = brute_force(&d, &ids, k);
            for i in 0..6 {
                let mut got: Vec<usize> = w.row(i).iter().map(|t| t.0).collect();
                got.sort();
                assert_eq!(got, expect[i], "{metric} k={k} row {i}");
            }
        }
    }
}

#[test]
fn two_individuals_tie_to_each_other() {
    let ps = vec![profile(0, 30.0, 50.0, 0, 1, 36.0, -86.0), profile(1, 60.0, 90.0, 1, 2, 36.5, -86.2)];
    for metric in [TieMetric::Gower, TieMetric::Spatial] {
        let w = build_weight_matrix(&ps, metric, 1, None).unwrap();
        assert_eq!(w.to_dense(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }
}
