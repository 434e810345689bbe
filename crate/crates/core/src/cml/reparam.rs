//! Map between free model parameters and an unconstrained vector.
//!
//! Spatial parameters use a logistic map onto `(0, 1)`, the error
//! correlation matrix uses Cholesky angles with `tanh` partial correlations,
//! thresholds use log gaps and the differenced choice covariance uses a
//! Cholesky factor with log diagonal and a unit top-left cell.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{IclvParams, ParamKey};

const DELTA_EDGE: f64 = 1e-6;
const PARTIAL_EDGE: f64 = 0.999_999;
const LOG_RANGE: f64 = 18.0;

#[derive(Debug, Clone)]
enum Slot {
    Identity(ParamKey),
    Logistic(ParamKey),
    /// Partial correlation `(row, col)` of the latent error correlation.
    Partial { row: usize, col: usize },
    /// Log gap `index` of an indicator's threshold block.
    Gap { indicator: usize, index: usize },
    /// Cholesky factor cell of the differenced choice covariance.
    Chol { row: usize, col: usize },
}

/// Reparameterisation bound to a template parameter set; fixed parameters
/// keep the template's values.
#[derive(Debug, Clone)]
pub struct Reparam {
    template: IclvParams,
    slots: Vec<Slot>,
    names: Vec<String>,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Partial correlations of a correlation matrix (Cholesky angles).
pub fn partial_correlations(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    let l = c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParams("correlation matrix not positive definite".into()))?
        .l();
    let mut z = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut rem = 1.0f64;
        for j in 0..i {
            z[(i, j)] = l[(i, j)] / rem.sqrt();
            rem -= l[(i, j)] * l[(i, j)];
        }
    }
    Ok(z)
}

/// Correlation matrix from partial correlations in `(-1, 1)`.
pub fn correlation_from_partials(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.nrows();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut rem = 1.0f64;
        for j in 0..i {
            l[(i, j)] = z[(i, j)] * rem.max(0.0).sqrt();
            rem -= l[(i, j)] * l[(i, j)];
        }
        l[(i, i)] = rem.max(0.0).sqrt();
    }
    let mut c = &l * l.transpose();
    for i in 0..n {
        c[(i, i)] = 1.0;
    }
    c
}

impl Reparam {
    pub fn new(template: &IclvParams) -> Result<Self> {
        template.validate()?;
        let mut slots = Vec::new();
        let mut names = Vec::new();
        let mut gamma_done = false;
        let mut thr_done = vec![false; template.measurement.n_indicators()];
        let mut chol_done = false;
        for key in template.free_keys() {
            match key {
                ParamKey::Delta { .. } => {
                    slots.push(Slot::Logistic(key));
                    names.push(template.name(key));
                }
                ParamKey::GammaCorr { .. } => {
                    if gamma_done {
                        continue;
                    }
                    gamma_done = true;
                    let l = template.n_latent();
                    for row in 0..l {
                        for col in 0..row {
                            let k = ParamKey::GammaCorr { row, col };
                            if template.is_free(k) {
                                slots.push(Slot::Partial { row, col });
                                names.push(template.name(k));
                            }
                        }
                    }
                }
                ParamKey::Threshold { indicator, .. } => {
                    if thr_done[indicator] {
                        continue;
                    }
                    thr_done[indicator] = true;
                    for index in 0..template.measurement.thresholds[indicator].len() {
                        slots.push(Slot::Gap { indicator, index });
                        names.push(template.name(ParamKey::Threshold { indicator, index }));
                    }
                }
                ParamKey::LambdaDiff { .. } => {
                    if chol_done {
                        continue;
                    }
                    chol_done = true;
                    let d = template.choice.n_alternatives() - 1;
                    for row in 0..d {
                        for col in 0..=row {
                            if row == 0 && col == 0 {
                                continue;
                            }
                            slots.push(Slot::Chol { row, col });
                            names.push(template.name(ParamKey::LambdaDiff { row, col }));
                        }
                    }
                }
                _ => {
                    slots.push(Slot::Identity(key));
                    names.push(template.name(key));
                }
            }
        }
        Ok(Self {
            template: template.clone(),
            slots,
            names,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Name of the natural-scale parameter most closely tied to each slot.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn template(&self) -> &IclvParams {
        &self.template
    }

    /// Unconstrained coordinates of `params` (which must share the
    /// template's structure).
    pub fn to_unconstrained(&self, params: &IclvParams) -> Result<Vec<f64>> {
        let z = partial_correlations(&params.structural.gamma)?;
        let chol = params
            .choice
            .lambda_diff
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParams("lambda_diff not positive definite".into()))?
            .l();
        Ok(self
            .slots
            .iter()
            .map(|slot| match *slot {
                Slot::Identity(k) => params.get(k),
                Slot::Logistic(k) => logit(params.get(k).clamp(DELTA_EDGE, 1.0 - DELTA_EDGE)),
                Slot::Partial { row, col } => z[(row, col)].clamp(-PARTIAL_EDGE, PARTIAL_EDGE).atanh(),
                Slot::Gap { indicator, index } => {
                    let th = &params.measurement.thresholds[indicator];
                    let prev = if index == 0 { 0.0 } else { th[index - 1] };
                    (th[index] - prev).ln()
                }
                Slot::Chol { row, col } => {
                    if row == col {
                        chol[(row, col)].ln()
                    } else {
                        chol[(row, col)]
                    }
                }
            })
            .collect())
    }

    /// Parameters at unconstrained point `u`.
    pub fn apply(&self, u: &[f64]) -> Result<IclvParams> {
        if u.len() != self.slots.len() {
            return Err(Error::Estimation(format!(
                "expected {} unconstrained values, got {}",
                self.slots.len(),
                u.len()
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Estimation("non-finite unconstrained parameter".into()));
        }
        let mut p = self.template.clone();
        let mut z = partial_correlations(&p.structural.gamma)?;
        let mut gamma_touched = false;
        let mut chol = p
            .choice
            .lambda_diff
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParams("lambda_diff not positive definite".into()))?
            .l();
        let mut chol_touched = false;
        let mut gaps: Vec<Option<Vec<f64>>> = vec![None; p.measurement.n_indicators()];
        for (slot, &v) in self.slots.iter().zip(u) {
            match *slot {
                Slot::Identity(k) => p.set(k, v),
                Slot::Logistic(k) => p.set(k, logistic(v).min(1.0 - DELTA_EDGE)),
                Slot::Partial { row, col } => {
                    z[(row, col)] = v.tanh().clamp(-PARTIAL_EDGE, PARTIAL_EDGE);
                    gamma_touched = true;
                }
                Slot::Gap { indicator, index } => {
                    let n = p.measurement.thresholds[indicator].len();
                    gaps[indicator].get_or_insert_with(|| vec![0.0; n])[index] =
                        v.clamp(-LOG_RANGE, LOG_RANGE).exp();
                }
                Slot::Chol { row, col } => {
                    chol[(row, col)] = if row == col {
                        v.clamp(-LOG_RANGE, LOG_RANGE).exp()
                    } else {
                        v
                    };
                    chol_touched = true;
                }
            }
        }
        if gamma_touched {
            p.structural.gamma = correlation_from_partials(&z);
        }
        for (h, g) in gaps.into_iter().enumerate() {
            if let Some(g) = g {
                let mut acc = 0.0;
                for (j, gap) in g.into_iter().enumerate() {
                    acc += gap;
                    p.measurement.thresholds[h][j] = acc;
                }
            }
        }
        if chol_touched {
            let m = &chol * chol.transpose();
            p.choice.lambda_diff = m;
            p.choice.lambda_diff[(0, 0)] = 1.0;
        }
        Ok(p)
    }

    /// Natural-scale values of the free parameters, in `free_keys` order.
    pub fn natural(&self, params: &IclvParams) -> Vec<f64> {
        self.template
            .free_keys()
            .into_iter()
            .map(|k| params.get(k))
            .collect()
    }

    /// Jacobian `d natural / d u` by central differences.
    pub fn natural_jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let keys = self.template.free_keys();
        let mut g = DMatrix::zeros(keys.len(), u.len());
        let mut x = u.to_vec();
        for j in 0..u.len() {
            let h = 1e-6 * (1.0 + u[j].abs());
            x[j] = u[j] + h;
            let up = self.natural(&self.apply(&x)?);
            x[j] = u[j] - h;
            let dn = self.natural(&self.apply(&x)?);
            x[j] = u[j];
            for i in 0..keys.len() {
                g[(i, j)] = (up[i] - dn[i]) / (2.0 * h);
            }
        }
        Ok(g)
    }
}
