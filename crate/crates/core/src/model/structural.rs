//! Spatial propagation `S`, cross-latent moderation `D` and the implied
//! latent moments.

use std::rc::Rc;

use nalgebra::{DMatrix, DVector};

use super::params::StructuralParams;
use super::sample::Sample;
use crate::error::{Error, Result};
use crate::social::WeightMatrix;

/// Largest sample for which `(I - delta W)^-1` is formed densely.
pub const DENSE_LIMIT: usize = 500;

#[derive(Debug, Clone)]
enum Propagator {
    Identity,
    Dense(DMatrix<f64>),
    Iterative(f64),
}

/// `S = (I - delta (W x I_L))^-1`, held per latent because the operator is
/// block separable: `S_l = (I - delta_l W)^-1`.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    q: usize,
    props: Vec<Propagator>,
}

pub fn build_spatial_operator(w: &WeightMatrix, delta: &[f64]) -> Result<SpatialOperator> {
    let q = w.q();
    let mut props = Vec::with_capacity(delta.len());
    for &d in delta {
        if !(0.0..1.0).contains(&d) {
            return Err(Error::Conditioning(format!(
                "spatial parameter {d} outside [0, 1)"
            )));
        }
        props.push(if d == 0.0 {
            Propagator::Identity
        } else if q <= DENSE_LIMIT {
            let a = DMatrix::identity(q, q) - w.to_dense() * d;
            let inv = a
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::Conditioning("I - delta W is singular".into()))?;
            if inv.iter().any(|v| !v.is_finite()) {
                return Err(Error::Conditioning("non-finite spatial inverse".into()));
            }
            Propagator::Dense(inv)
        } else {
            Propagator::Iterative(d)
        });
    }
    Ok(SpatialOperator { q, props })
}

impl SpatialOperator {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_latent(&self) -> usize {
        self.props.len()
    }

    pub fn is_identity(&self, l: usize) -> bool {
        matches!(self.props[l], Propagator::Identity)
    }

    /// `S_l x` for one latent.
    pub fn apply_latent(&self, w: &WeightMatrix, l: usize, x: &[f64]) -> Result<Vec<f64>> {
        match &self.props[l] {
            Propagator::Identity => Ok(x.to_vec()),
            Propagator::Dense(m) => Ok((m * DVector::from_column_slice(x)).as_slice().to_vec()),
            Propagator::Iterative(d) => w.solve_spatial(*d, x),
        }
    }

    /// `S v` for a stacked vector indexed `q * L + l`.
    pub fn apply(&self, w: &WeightMatrix, v: &[f64]) -> Result<Vec<f64>> {
        let l_n = self.n_latent();
        let mut out = vec![0.0; v.len()];
        for l in 0..l_n {
            let x: Vec<f64> = (0..self.q).map(|q| v[q * l_n + l]).collect();
            let y = self.apply_latent(w, l, &x)?;
            for q in 0..self.q {
                out[q * l_n + l] = y[q];
            }
        }
        Ok(out)
    }

    /// Row `q` of `S_l`.
    pub fn row(&self, w: &WeightMatrix, l: usize, q: usize) -> Vec<f64> {
        match &self.props[l] {
            Propagator::Identity => {
                let mut e = vec![0.0; self.q];
                e[q] = 1.0;
                e
            }
            Propagator::Dense(m) => m.row(q).iter().copied().collect(),
            Propagator::Iterative(d) => {
                // Neumann series for (I - d W')^-1 e_q.
                let mut term = vec![0.0; self.q];
                term[q] = 1.0;
                let mut acc = term.clone();
                for _ in 0..10_000 {
                    term = w.tr_mul_vec(&term).into_iter().map(|v| v * d).collect();
                    let mut size = 0.0f64;
                    for (a, t) in acc.iter_mut().zip(&term) {
                        *a += t;
                        size = size.max(t.abs());
                    }
                    if size < 1e-17 {
                        break;
                    }
                }
                acc
            }
        }
    }

    /// `(S_l S_m')[q, r]`.
    pub fn cross(&self, w: &WeightMatrix, l: usize, m: usize, q: usize, r: usize) -> f64 {
        match (&self.props[l], &self.props[m]) {
            (Propagator::Identity, Propagator::Identity) => (q == r) as u8 as f64,
            (Propagator::Dense(a), Propagator::Identity) => a[(q, r)],
            (Propagator::Identity, Propagator::Dense(b)) => b[(r, q)],
            (Propagator::Dense(a), Propagator::Dense(b)) => a.row(q).dot(&b.row(r)),
            _ => {
                let x = self.row(w, l, q);
                let y = self.row(w, m, r);
                x.iter().zip(&y).map(|(a, b)| a * b).sum()
            }
        }
    }

    /// Full `QL x QL` operator.
    pub fn to_dense(&self, w: &WeightMatrix) -> DMatrix<f64> {
        let l_n = self.n_latent();
        let n = self.q * l_n;
        let mut out = DMatrix::zeros(n, n);
        for l in 0..l_n {
            for q in 0..self.q {
                let row = self.row(w, l, q);
                for (r, v) in row.into_iter().enumerate() {
                    out[(q * l_n + l, r * l_n + l)] = v;
                }
            }
        }
        out
    }
}

/// Per-individual moderation block `(I_L - R)^-1`; the full operator is
/// `I_Q x` this block.
pub fn build_moderation(structural: &StructuralParams) -> Result<DMatrix<f64>> {
    let l = structural.n_latent();
    for c in &structural.cross_loadings {
        if c.source >= c.target || c.target >= l {
            return Err(Error::InvalidParams(
                "cross-loading pattern must be strictly lower-triangular".into(),
            ));
        }
    }
    let a = DMatrix::identity(l, l) - structural.rho_matrix();
    a.try_inverse()
        .ok_or_else(|| Error::Conditioning("I - R is singular".into()))
}

/// Mean `theta` and covariance `Xi` of the stacked latent vector.
#[derive(Debug, Clone)]
pub struct LatentMoments {
    pub theta: DVector<f64>,
    pub xi: DMatrix<f64>,
}

/// Latent structure evaluated at one parameter point, from which means and
/// covariance blocks of any individual pair can be extracted.
#[derive(Debug, Clone)]
pub struct LatentStructure {
    pub spatial: Rc<SpatialOperator>,
    pub moderation: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    /// Latent mean per individual.
    pub theta: Vec<DVector<f64>>,
}

impl LatentStructure {
    pub fn new(structural: &StructuralParams, sample: &Sample, w: &WeightMatrix) -> Result<Self> {
        let spatial = Rc::new(build_spatial_operator(w, &structural.delta)?);
        Self::with_spatial(structural, sample, w, spatial)
    }

    /// As [`new`](Self::new) with a prebuilt spatial operator for the same
    /// spatial parameters.
    pub fn with_spatial(
        structural: &StructuralParams,
        sample: &Sample,
        w: &WeightMatrix,
        spatial: Rc<SpatialOperator>,
    ) -> Result<Self> {
        let q = sample.q();
        if w.q() != q {
            return Err(Error::Schema(format!(
                "weight matrix covers {} individuals, sample has {q}",
                w.q()
            )));
        }
        let l_n = structural.n_latent();
        if spatial.n_latent() != l_n || spatial.q() != q {
            return Err(Error::Schema("spatial operator does not match the model".into()));
        }
        let moderation = build_moderation(structural)?;
        let mut sa = vec![0.0; q * l_n];
        for (i, ind) in sample.individuals.iter().enumerate() {
            for l in 0..l_n {
                sa[i * l_n + l] = ind.structural[l]
                    .iter()
                    .zip(&structural.alpha[l])
                    .map(|(x, a)| x * a)
                    .sum();
            }
        }
        let ssa = spatial.apply(w, &sa)?;
        let theta = (0..q)
            .map(|i| &moderation * DVector::from_column_slice(&ssa[i * l_n..(i + 1) * l_n]))
            .collect();
        Ok(Self {
            spatial,
            moderation,
            gamma: structural.gamma.clone(),
            theta,
        })
    }

    /// Covariance block `Xi_{q r}` (`L x L`).
    pub fn block(&self, w: &WeightMatrix, q: usize, r: usize) -> DMatrix<f64> {
        let l_n = self.gamma.nrows();
        let mut inner = DMatrix::zeros(l_n, l_n);
        for l in 0..l_n {
            for m in 0..l_n {
                let g = self.gamma[(l, m)];
                if g != 0.0 {
                    inner[(l, m)] = g * self.spatial.cross(w, l, m, q, r);
                }
            }
        }
        &self.moderation * inner * self.moderation.transpose()
    }
}

/// Dense latent moments for the whole sample.
pub fn latent_moments(
    structural: &StructuralParams,
    sample: &Sample,
    w: &WeightMatrix,
) -> Result<LatentMoments> {
    let ls = LatentStructure::new(structural, sample, w)?;
    let q = sample.q();
    let l_n = structural.n_latent();
    let mut theta = DVector::zeros(q * l_n);
    for i in 0..q {
        theta.rows_mut(i * l_n, l_n).copy_from(&ls.theta[i]);
    }
    let mut xi = DMatrix::zeros(q * l_n, q * l_n);
    for i in 0..q {
        for j in 0..q {
            xi.view_mut((i * l_n, j * l_n), (l_n, l_n))
                .copy_from(&ls.block(w, i, j));
        }
    }
    Ok(LatentMoments { theta, xi })
}
