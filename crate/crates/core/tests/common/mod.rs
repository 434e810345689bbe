#![allow(dead_code)]

use std::collections::BTreeSet;

use iclv_core::model::{
    ChoiceParams, CrossLoading, IclvParams, Interaction, MeasurementParams, ParamKey,
    StructuralParams,
};
use iclv_core::social::WeightMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};

/// Two latents (first spatial, second moderated by the first), `h`
/// indicators alternating between latents, two alternatives and three
/// attributes.
pub fn two_latent(h: usize, categories: usize) -> IclvParams {
    let mut loadings = DMatrix::zeros(h, 2);
    for k in 0..h {
        loadings[(k, k % 2)] = [0.9, -0.7, 0.6, 0.8, -0.5, 0.7, 1.0][k % 7];
    }
    let mut lambda = DMatrix::zeros(2, 2);
    lambda[(0, 1)] = 0.6;
    lambda[(1, 1)] = -0.5;
    let mut p = IclvParams {
        structural: StructuralParams {
            latents: vec!["wom".into(), "risk".into()],
            covariates: vec![vec!["s1".into(), "s2".into()], vec!["s3".into()]],
            alpha: vec![vec![0.5, -0.4], vec![0.3]],
            delta: vec![0.3, 0.0],
            gamma: DMatrix::from_row_slice(2, 2, &[1.0, 0.35, 0.35, 1.0]),
            cross_loadings: vec![CrossLoading { target: 1, source: 0, value: -0.6 }],
        },
        measurement: MeasurementParams {
            indicators: (0..h).map(|k| format!("y{}", k + 1)).collect(),
            categories,
            intercept: (0..h).map(|k| 1.2 + 0.15 * (k % 3) as f64).collect(),
            covariates: vec![vec![]; h],
            coef: vec![vec![]; h],
            loadings,
            thresholds: (0..h)
                .map(|_| (0..categories - 2).map(|j| 0.9 * (j + 1) as f64).collect())
                .collect(),
        },
        choice: ChoiceParams {
            alternatives: vec!["cv".into(), "av".into()],
            base_alternative: 0,
            attributes: vec!["const".into(), "x1".into(), "x2".into()],
            b: vec![0.4, 0.8, -0.9],
            lambda,
            interactions: vec![Interaction { latent: 0, attribute: 2, value: 0.3 }],
            lambda_diff: DMatrix::from_element(1, 1, 1.0),
        },
        fixed: BTreeSet::new(),
    };
    p.set_free(ParamKey::Delta { latent: 1 }, false);
    for k in 0..h {
        p.set_free(ParamKey::Loading { indicator: k, latent: 1 - k % 2 }, false);
    }
    p
}

/// Same model with a third alternative and a free differenced covariance.
pub fn three_alternatives(h: usize, categories: usize) -> IclvParams {
    let mut p = two_latent(h, categories);
    p.choice.alternatives.push("bus".into());
    let mut lambda = DMatrix::zeros(2, 3);
    lambda[(0, 1)] = 0.6;
    lambda[(1, 1)] = -0.5;
    lambda[(0, 2)] = 0.2;
    p.choice.lambda = lambda;
    p.choice.lambda_diff = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.3]);
    p
}

/// Symmetric ring in which each individual is tied to `k` neighbours on
/// each side.
pub fn ring(q: usize, k: usize) -> WeightMatrix {
    WeightMatrix::from_rows(
        (0..q)
            .map(|i| {
                let mut row = Vec::new();
                for s in 1..=k {
                    row.push(((i + s) % q, 0.5 / k as f64));
                    row.push(((i + q - s) % q, 0.5 / k as f64));
                }
                row
            })
            .collect(),
    )
    .unwrap()
}

/// Random directed `k`-tie matrix with unequal weights.
pub fn random_ties(q: usize, k: usize, seed: u64) -> WeightMatrix {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    WeightMatrix::from_rows(
        (0..q)
            .map(|i| {
                let mut cols: Vec<usize> = Vec::new();
                while cols.len() < k {
                    let j = rng.gen_range(0..q);
                    if j != i && !cols.contains(&j) {
                        cols.push(j);
                    }
                }
                let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
                let total: f64 = raw.iter().sum();
                cols.into_iter().zip(raw).map(|(j, w)| (j, w / total)).collect()
            })
            .collect(),
    )
    .unwrap()
}

/// Disjoint mutual pairs (0,1), (2,3), ...
pub fn matched_pairs(q: usize) -> WeightMatrix {
    WeightMatrix::from_rows((0..q).map(|i| vec![(i ^ 1, 1.0)]).collect()).unwrap()
}
