//! Joint moments of the stacked propensity/utility vector and their
//! utility-differenced counterparts.

use nalgebra::{DMatrix, DVector};

use super::params::{ChoiceParams, IclvParams};
use super::sample::{Individual, Sample};
use super::structural::{latent_moments, LatentMoments};
use crate::error::{Error, Result};
use crate::social::WeightMatrix;

/// Systematic utilities of all alternatives in one task given latent values
/// `z`: `b'x_i + lambda_i'z + sum_k g_k x_{attr(k), i} z_{latent(k)}`.
pub fn choice_utility_systematic(
    choice: &ChoiceParams,
    z: &[f64],
    x: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let ni = choice.n_alternatives();
    if x.nrows() != choice.n_attributes() || x.ncols() != ni {
        return Err(Error::Schema("attribute matrix has the wrong shape".into()));
    }
    if z.len() != choice.lambda.nrows() {
        return Err(Error::Schema("latent vector has the wrong length".into()));
    }
    Ok(DVector::from_fn(ni, |i, _| {
        let mut v: f64 = (0..choice.n_attributes()).map(|m| choice.b[m] * x[(m, i)]).sum();
        for (l, zl) in z.iter().enumerate() {
            v += choice.lambda[(l, i)] * zl;
        }
        for it in &choice.interactions {
            v += it.value * x[(it.attribute, i)] * z[it.latent];
        }
        v
    }))
}

/// Per-individual linear map from latents to the stacked vector
/// `U_q = mu1 + mu2 z_q + error`, with the error covariance `sigma`.
#[derive(Debug, Clone)]
pub struct IndividualLoadings {
    pub mu1: DVector<f64>,
    pub mu2: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

/// Number of stacked entries per individual: `H + T I`.
pub fn stacked_len(params: &IclvParams, n_tasks: usize) -> usize {
    params.measurement.n_indicators() + n_tasks * params.choice.n_alternatives()
}

pub fn individual_loadings(params: &IclvParams, ind: &Individual) -> IndividualLoadings {
    let m = &params.measurement;
    let c = &params.choice;
    let h = m.n_indicators();
    let ni = c.n_alternatives();
    let l_n = params.n_latent();
    let n = h + ind.tasks.len() * ni;
    let mut mu1 = DVector::zeros(n);
    let mut mu2 = DMatrix::zeros(n, l_n);
    let mut sigma = DMatrix::zeros(n, n);
    for k in 0..h {
        mu1[k] = m.intercept[k]
            + m.coef[k]
                .iter()
                .zip(&ind.measurement[k])
                .map(|(a, x)| a * x)
                .sum::<f64>();
        for l in 0..l_n {
            mu2[(k, l)] = m.loadings[(k, l)];
        }
        sigma[(k, k)] = 1.0;
    }
    let lam = c.lambda_full();
    for (t, task) in ind.tasks.iter().enumerate() {
        let base = h + t * ni;
        for i in 0..ni {
            mu1[base + i] = (0..c.n_attributes())
                .map(|a| c.b[a] * task.attributes[(a, i)])
                .sum();
            for l in 0..l_n {
                mu2[(base + i, l)] = c.lambda[(l, i)];
            }
            for it in &c.interactions {
                mu2[(base + i, it.latent)] += it.value * task.attributes[(it.attribute, i)];
            }
            for j in 0..ni {
                sigma[(base + i, base + j)] = lam[(i, j)];
            }
        }
    }
    IndividualLoadings { mu1, mu2, sigma }
}

/// Mean `B` and covariance `Omega` of the stacked vector over the sample.
#[derive(Debug, Clone)]
pub struct JointMoments {
    pub b: DVector<f64>,
    pub omega: DMatrix<f64>,
    /// Entries per individual.
    pub block: usize,
}

pub fn joint_moments(params: &IclvParams, sample: &Sample, w: &WeightMatrix) -> Result<JointMoments> {
    let lm = latent_moments(&params.structural, sample, w)?;
    joint_from_latent(params, sample, &lm)
}

pub fn joint_from_latent(
    params: &IclvParams,
    sample: &Sample,
    lm: &LatentMoments,
) -> Result<JointMoments> {
    let q = sample.q();
    let l_n = params.n_latent();
    let n = stacked_len(params, sample.n_tasks());
    let loads: Vec<IndividualLoadings> = sample
        .individuals
        .iter()
        .map(|ind| individual_loadings(params, ind))
        .collect();
    let mut b = DVector::zeros(q * n);
    let mut omega = DMatrix::zeros(q * n, q * n);
    for i in 0..q {
        let th = lm.theta.rows(i * l_n, l_n);
        b.rows_mut(i * n, n).copy_from(&(&loads[i].mu1 + &loads[i].mu2 * th));
        for j in 0..q {
            let xi = lm.xi.view((i * l_n, j * l_n), (l_n, l_n));
            let mut blk = &loads[i].mu2 * xi * loads[j].mu2.transpose();
            if i == j {
                blk += &loads[i].sigma;
            }
            omega.view_mut((i * n, j * n), (n, n)).copy_from(&blk);
        }
    }
    Ok(JointMoments { b, omega, block: n })
}

/// Sparse block-diagonal map that keeps indicator propensities and replaces
/// each task's utilities by non-chosen minus chosen differences.
#[derive(Debug, Clone)]
pub struct DifferencingMatrix {
    h: usize,
    n_alt: usize,
    chosen: Vec<Vec<usize>>,
}

pub fn build_differencing(params: &IclvParams, sample: &Sample) -> DifferencingMatrix {
    DifferencingMatrix {
        h: params.measurement.n_indicators(),
        n_alt: params.choice.n_alternatives(),
        chosen: sample
            .individuals
            .iter()
            .map(|ind| ind.tasks.iter().map(|t| t.chosen).collect())
            .collect(),
    }
}

impl DifferencingMatrix {
    pub fn n_tasks(&self) -> usize {
        self.chosen.first().map_or(0, Vec::len)
    }

    /// Rows per individual: `H + T (I - 1)`.
    pub fn rows_per_individual(&self) -> usize {
        self.h + self.n_tasks() * (self.n_alt - 1)
    }

    /// Columns per individual: `H + T I`.
    pub fn cols_per_individual(&self) -> usize {
        self.h + self.n_tasks() * self.n_alt
    }

    /// Nonzero entries `(row, col, value)` of individual `q`'s block.
    pub fn entries(&self, q: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for k in 0..self.h {
            out.push((k, k, 1.0));
        }
        let d = self.n_alt - 1;
        for (t, &c) in self.chosen[q].iter().enumerate() {
            let r0 = self.h + t * d;
            let c0 = self.h + t * self.n_alt;
            let mut r = r0;
            for i in 0..self.n_alt {
                if i == c {
                    continue;
                }
                out.push((r, c0 + i, 1.0));
                out.push((r, c0 + c, -1.0));
                r += 1;
            }
        }
        out
    }

    pub fn block(&self, q: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows_per_individual(), self.cols_per_individual());
        for (r, c, v) in self.entries(q) {
            m[(r, c)] = v;
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let q = self.chosen.len();
        let (r, c) = (self.rows_per_individual(), self.cols_per_individual());
        let mut m = DMatrix::zeros(q * r, q * c);
        for i in 0..q {
            m.view_mut((i * r, i * c), (r, c)).copy_from(&self.block(i));
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct DifferencedMoments {
    pub b: DVector<f64>,
    pub omega: DMatrix<f64>,
    pub block: usize,
}

pub fn differenced_moments(jm: &JointMoments, m: &DifferencingMatrix) -> DifferencedMoments {
    let md = m.to_dense();
    let omega = &md * &jm.omega * md.transpose();
    DifferencedMoments {
        b: &md * &jm.b,
        omega: (&omega + omega.transpose()) * 0.5,
        block: m.rows_per_individual(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::fixtures::small_params;
    use crate::model::synth::{simulate_sample, SyntheticDesign};
    use rand::SeedableRng;

    fn ring(q: usize) -> WeightMatrix {
        WeightMatrix::from_rows(
            (0..q)
                .map(|i| vec![((i + 1) % q, 0.5), ((i + q - 1) % q, 0.5)])
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn utility_difference_example() {
        let mut p = small_params(1, 5);
        p.choice.attributes = vec!["const".into(), "ties".into(), "city".into(), "price".into()];
        p.choice.b = vec![0.987, 1.091, 0.518, -2.529];
        p.choice.interactions.clear();
        p.choice.lambda.fill(0.0);
        let x = DMatrix::from_column_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.6, 0.3, 1.5]);
        let v = choice_utility_systematic(&p.choice, &[0.0, 0.0], &x).unwrap();
        // 0.987 + 1.091*0.6 + 0.518*0.3 - 2.529*1.5
        assert!((v[1] - v[0] - (-1.9965)).abs() < 1e-12);
    }

    #[test]
    fn differencing_dimensions_and_rows() {
        let mut p = small_params(3, 5);
        p.choice.alternatives = vec!["a".into(), "b".into(), "c".into()];
        p.choice.lambda = DMatrix::zeros(2, 3);
        p.choice.lambda_diff = DMatrix::identity(2, 2);
        let q = 4;
        let t = 2;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let sample = simulate_sample(&p, &ring(q), &SyntheticDesign::default_for(&p, q, t), &mut rng)
            .unwrap();
        let m = build_differencing(&p, &sample);
        let d = m.to_dense();
        assert_eq!(d.nrows(), q * (3 + t * 2));
        assert_eq!(d.ncols(), q * (3 + t * 3));
        for r in 0..d.nrows() {
            let s: f64 = d.row(r).sum();
            let nz = d.row(r).iter().filter(|v| **v != 0.0).count();
            if r % (3 + t * 2) < 3 {
                assert_eq!((s, nz), (1.0, 1));
            } else {
                assert_eq!((s, nz), (0.0, 2));
            }
        }
        // chosen column carries -1 in both difference rows of a task
        let c = sample.individuals[0].tasks[0].chosen;
        assert_eq!(d[(3, 3 + c)], -1.0);
        assert_eq!(d[(4, 3 + c)], -1.0);
    }

    #[test]
    fn joint_moments_symmetric_psd_and_additive() {
        let p = small_params(3, 5);
        let q = 5;
        let w = ring(q);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let sample = simulate_sample(&p, &w, &SyntheticDesign::default_for(&p, q, 2), &mut rng)
            .unwrap();
        let jm = joint_moments(&p, &sample, &w).unwrap();
        assert!((jm.omega.clone() - jm.omega.transpose()).abs().max() < 1e-13);
        let dm = differenced_moments(&jm, &build_differencing(&p, &sample));
        let eig = dm.omega.clone().symmetric_eigen().eigenvalues;
        assert!(eig.min() > -1e-10);
        assert_eq!(dm.b.len(), q * (3 + 2));
        // Omega - I x Sigma equals mu2 Xi mu2' (structural contribution only)
        let lm = latent_moments(&p.structural, &sample, &w).unwrap();
        let n = jm.block;
        let l0 = individual_loadings(&p, &sample.individuals[0]);
        let l1 = individual_loadings(&p, &sample.individuals[1]);
        let off = jm.omega.view((0, n), (n, n)).into_owned();
        let expect = &l0.mu2 * lm.xi.view((0, 2), (2, 2)) * l1.mu2.transpose();
        assert!((off - expect).abs().max() < 1e-13);
    }
}
