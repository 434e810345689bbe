#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use iclv_cli::{Overrides, RunConfig};
use iclv_core::io::{write_sample, ParameterFile, SampleData};
use iclv_core::model::{
    simulate_sample, ChoiceParams, CrossLoading, IclvParams, Interaction, MeasurementParams,
    ParamKey, Sample, StructuralParams, SyntheticDesign,
};
use iclv_core::social::WeightMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};

pub fn reference_params_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/reference_params.txt")
}

/// Two latents (the first spatially dependent, the second moderated by the
/// first), `h` indicators alternating between latents, two alternatives.
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

pub fn simulate(p: &IclvParams, w: &WeightMatrix, t: usize, seed: u64) -> Sample {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    simulate_sample(p, w, &SyntheticDesign::default_for(p, w.q(), t), &mut rng).unwrap()
}

/// Writes a parameter file, a simulated sample and a run configuration
/// into `dir` and returns the configuration path.
pub fn estimation_fixture(dir: &Path, q: usize, extra: &str) -> PathBuf {
    let p = two_latent(3, 5);
    let w = random_ties(q, 3, 7);
    let sample = simulate(&p, &w, 2, 13);
    let pf = ParameterFile::new(p.clone());
    pf.write(&dir.join("params.txt")).unwrap();
    let text = write_sample(&SampleData { sample, locations: None }, &p).unwrap();
    std::fs::write(dir.join("sample.csv"), text).unwrap();
    let cfg = dir.join("run.conf");
    std::fs::write(
        &cfg,
        format!("params=params.txt\nsample=sample.csv\nties=3\n{extra}"),
    )
    .unwrap();
    cfg
}

pub fn load(cfg: &Path, out: &Path) -> RunConfig {
    RunConfig::load(
        Some(cfg),
        &Overrides {
            out: Some(out.to_path_buf()),
            ..Overrides::default()
        },
    )
    .unwrap()
}

pub fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let body = iclv_cli::strip_header(&text);
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
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

/// Complementary error function: Maclaurin series of `erf` for small
/// arguments, Lentz continued fraction beyond.
pub fn erfc(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.5 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x * x / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return 1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum;
    }
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = x + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / f
}

pub fn phi_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Bivariate normal CDF through Plackett's identity
/// `F(a, b; r) = Phi(a) Phi(b) + int_0^r phi2(a, b; t) dt`, integrated by
/// composite Simpson.
pub fn bvn_cdf_quadrature(a: f64, b: f64, r: f64) -> f64 {
    let dens = |t: f64| {
        let s = 1.0 - t * t;
        (-(a * a - 2.0 * t * a * b + b * b) / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s.sqrt())
    };
    let n = 4000;
    let h = r / n as f64;
    let mut total = dens(0.0) + dens(r);
    for i in 1..n {
        total += dens(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    phi_cdf(a) * phi_cdf(b) + total * h / 3.0
}
