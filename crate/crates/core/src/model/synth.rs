//! Simulation of samples from the model's data-generating process.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::moments::choice_utility_systematic;
use super::params::IclvParams;
use super::sample::{ChoiceTask, Individual, Sample};
use super::structural::{build_moderation, build_spatial_operator};
use crate::error::{Error, Result};
use crate::social::WeightMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Dist {
    Constant(f64),
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Bernoulli(f64),
    /// Uniform pick from a list of levels.
    Levels(Vec<f64>),
}

impl Dist {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Dist::Constant(v) => *v,
            Dist::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            Dist::Uniform { lo, hi } => rng.gen_range(*lo..*hi),
            Dist::Bernoulli(p) => (rng.gen::<f64>() < *p) as u8 as f64,
            Dist::Levels(v) => v[rng.gen_range(0..v.len())],
        }
    }
}

/// Covariate and attribute distributions for a synthetic sample.
#[derive(Debug, Clone)]
pub struct SyntheticDesign {
    pub q: usize,
    pub n_tasks: usize,
    /// Distribution per covariate name; a covariate shared by several
    /// equations takes one value per individual.
    pub covariates: BTreeMap<String, Dist>,
    /// `[attribute][alternative]`.
    pub attributes: Vec<Vec<Dist>>,
}

impl SyntheticDesign {
    /// Standard normal covariates; attributes are zero for the base
    /// alternative, one for an attribute named `const`, standard normal
    /// otherwise.
    pub fn default_for(params: &IclvParams, q: usize, n_tasks: usize) -> Self {
        let mut covariates = BTreeMap::new();
        for name in params
            .structural
            .covariates
            .iter()
            .chain(&params.measurement.covariates)
            .flatten()
        {
            covariates.insert(name.clone(), Dist::Normal { mean: 0.0, sd: 1.0 });
        }
        let c = &params.choice;
        let attributes = c
            .attributes
            .iter()
            .map(|name| {
                (0..c.n_alternatives())
                    .map(|i| {
                        if i == c.base_alternative {
                            Dist::Constant(0.0)
                        } else if name == "const" {
                            Dist::Constant(1.0)
                        } else {
                            Dist::Normal { mean: 0.0, sd: 1.0 }
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            q,
            n_tasks,
            covariates,
            attributes,
        }
    }
}

/// Draws latent values `z = D S (s alpha + eta)`, `eta_q ~ N(0, Gamma)`.
pub fn simulate_latents<R: Rng + ?Sized>(
    params: &IclvParams,
    structural_covariates: &[Vec<Vec<f64>>],
    w: &WeightMatrix,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let s = &params.structural;
    let l_n = s.n_latent();
    let q = structural_covariates.len();
    let chol = s
        .gamma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParams("gamma is not positive definite".into()))?
        .l();
    let mut v = vec![0.0; q * l_n];
    for (i, cov) in structural_covariates.iter().enumerate() {
        let e = DVector::from_fn(l_n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let eta = &chol * e;
        for l in 0..l_n {
            let mean: f64 = cov[l].iter().zip(&s.alpha[l]).map(|(x, a)| x * a).sum();
            v[i * l_n + l] = mean + eta[l];
        }
    }
    let sv = build_spatial_operator(w, &s.delta)?.apply(w, &v)?;
    let d = build_moderation(s)?;
    Ok((0..q)
        .map(|i| &d * DVector::from_column_slice(&sv[i * l_n..(i + 1) * l_n]))
        .collect())
}

/// Ordinal category of a propensity given thresholds.
pub fn categorize(params: &IclvParams, h: usize, ystar: f64) -> u8 {
    let m = &params.measurement;
    let mut j = 1;
    while j < m.categories && ystar > m.psi(h, j) {
        j += 1;
    }
    j as u8
}

pub fn simulate_sample<R: Rng + ?Sized>(
    params: &IclvParams,
    w: &WeightMatrix,
    design: &SyntheticDesign,
    rng: &mut R,
) -> Result<Sample> {
    params.validate()?;
    if w.q() != design.q {
        return Err(Error::Schema("weight matrix size differs from the design".into()));
    }
    let s = &params.structural;
    let m = &params.measurement;
    let c = &params.choice;
    let draw_named = |values: &BTreeMap<String, f64>, name: &str| -> Result<f64> {
        values
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("no distribution for covariate '{name}'")))
    };
    let mut covs = Vec::with_capacity(design.q);
    for _ in 0..design.q {
        let values: BTreeMap<String, f64> = design
            .covariates
            .iter()
            .map(|(k, d)| (k.clone(), d.draw(rng)))
            .collect();
        covs.push(values);
    }
    let structural: Vec<Vec<Vec<f64>>> = covs
        .iter()
        .map(|vals| {
            s.covariates
                .iter()
                .map(|names| names.iter().map(|n| draw_named(vals, n)).collect())
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let z = simulate_latents(params, &structural, w, rng)?;
    let lam_chol = c
        .lambda_diff
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParams("lambda_diff is not positive definite".into()))?
        .l();
    let ni = c.n_alternatives();
    let mut individuals = Vec::with_capacity(design.q);
    for (i, vals) in covs.iter().enumerate() {
        let measurement: Vec<Vec<f64>> = m
            .covariates
            .iter()
            .map(|names| names.iter().map(|n| draw_named(vals, n)).collect())
            .collect::<Result<_>>()?;
        let responses = (0..m.n_indicators())
            .map(|h| {
                let mean = m.intercept[h]
                    + m.coef[h].iter().zip(&measurement[h]).map(|(a, x)| a * x).sum::<f64>()
                    + (0..s.n_latent()).map(|l| m.loadings[(h, l)] * z[i][l]).sum::<f64>();
                let e: f64 = rng.sample(StandardNormal);
                categorize(params, h, mean + e)
            })
            .collect();
        let mut tasks = Vec::with_capacity(design.n_tasks);
        for _ in 0..design.n_tasks {
            let x = DMatrix::from_fn(c.n_attributes(), ni, |a, alt| design.attributes[a][alt].draw(rng));
            let v = choice_utility_systematic(c, z[i].as_slice(), &x)?;
            let e = DVector::from_fn(ni - 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            let err = &lam_chol * e;
            let mut best = 0;
            let mut best_u = f64::NEG_INFINITY;
            for alt in 0..ni {
                let u = v[alt] + if alt == 0 { 0.0 } else { err[alt - 1] };
                if u > best_u {
                    best_u = u;
                    best = alt;
                }
            }
            tasks.push(ChoiceTask {
                attributes: x,
                chosen: best,
            });
        }
        individuals.push(Individual {
            id: (i + 1).to_string(),
            structural: structural[i].clone(),
            measurement,
            responses,
            tasks,
        });
    }
    Ok(Sample { individuals })
}
