//! Maximisation of the composite likelihood, Godambe sandwich covariance and
//! the composite likelihood information criterion.

use nalgebra::{DMatrix, DVector};

use super::likelihood::{CmlModel, CmlOptions, Evaluation};
use super::reparam::Reparam;
use crate::error::{Error, Result};
use crate::model::{IclvParams, ParamKey, Sample};
use crate::social::WeightMatrix;

#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    pub cml: CmlOptions,
    /// Halton draws for the final likelihood and covariance.
    pub final_draws: usize,
    pub max_iter: usize,
    /// Stop when the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Stop when the relative objective change falls below this.
    pub rel_tol: f64,
    /// Relative finite-difference step for gradients.
    pub grad_step: f64,
    /// Relative finite-difference step for the Hessian.
    pub hess_step: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            cml: CmlOptions::default(),
            final_draws: 1000,
            max_iter: 500,
            grad_tol: 1e-4,
            rel_tol: 1e-8,
            grad_step: 1e-5,
            hess_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Converged,
    MaxIter,
    LineSearchFailure,
}

impl std::fmt::Display for Convergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Convergence::Converged => "converged",
            Convergence::MaxIter => "max-iter",
            Convergence::LineSearchFailure => "line-search-failure",
        })
    }
}

/// Composite likelihood as a function of the unconstrained vector.
pub struct Objective<'m, 'a> {
    model: &'m CmlModel<'a>,
    reparam: Reparam,
}

impl<'m, 'a> Objective<'m, 'a> {
    pub fn new(model: &'m CmlModel<'a>, template: &IclvParams) -> Result<Self> {
        Ok(Self {
            model,
            reparam: Reparam::new(template)?,
        })
    }

    pub fn reparam(&self) -> &Reparam {
        &self.reparam
    }

    pub fn model(&self) -> &CmlModel<'a> {
        self.model
    }

    pub fn evaluate(&self, u: &[f64]) -> Result<(f64, Evaluation)> {
        let p = self.reparam.apply(u)?;
        let e = self.model.evaluate(&p)?;
        Ok((self.model.total(&e), e))
    }

    /// Evaluation at `u` reusing unchanged terms of `base`.
    pub fn evaluate_from(&self, base: &Evaluation, u: &[f64]) -> Result<Evaluation> {
        let p = self.reparam.apply(u)?;
        self.model.evaluate_from(base, &p)
    }

    /// `f(a) - f(b)` summed term by term so that shared terms cancel exactly.
    fn difference(&self, a: &Evaluation, b: &Evaluation) -> f64 {
        let mut s = 0.0;
        for q in 0..a.within.len() {
            let d = a.within[q] - b.within[q];
            if d != 0.0 {
                s += d * self.model.pairs_of(q).len() as f64;
            }
        }
        for (x, y) in a.cross.iter().zip(&b.cross) {
            s += x - y;
        }
        s
    }

    fn shifted(u: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
        let mut x = u.to_vec();
        for &(j, h) in moves {
            x[j] += h;
        }
        x
    }

    /// Central-difference gradient at `u`, where `base` is the evaluation at `u`.
    pub fn gradient(&self, u: &[f64], base: &Evaluation, rel_step: f64) -> Result<Vec<f64>> {
        (0..u.len())
            .map(|j| {
                let h = rel_step * (1.0 + u[j].abs());
                let up = self.evaluate_from(base, &Self::shifted(u, &[(j, h)]))?;
                let dn = self.evaluate_from(base, &Self::shifted(u, &[(j, -h)]))?;
                Ok(self.difference(&up, &dn) / (2.0 * h))
            })
            .collect()
    }

    /// Forward-difference gradient.
    pub fn forward_gradient(&self, u: &[f64], base: &Evaluation, rel_step: f64) -> Result<Vec<f64>> {
        (0..u.len())
            .map(|j| {
                let h = rel_step * (1.0 + u[j].abs());
                let up = self.evaluate_from(base, &Self::shifted(u, &[(j, h)]))?;
                Ok(self.difference(&up, base) / h)
            })
            .collect()
    }

    /// Hessian as the central difference of the central-difference gradient.
    pub fn hessian(&self, u: &[f64], base: &Evaluation, rel_step: f64) -> Result<DMatrix<f64>> {
        let n = u.len();
        let h: Vec<f64> = u.iter().map(|v| rel_step * (1.0 + v.abs())).collect();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let pp = self.evaluate_from(base, &Self::shifted(u, &[(j, 2.0 * h[j])]))?;
            let mm = self.evaluate_from(base, &Self::shifted(u, &[(j, -2.0 * h[j])]))?;
            out[(j, j)] = (self.difference(&pp, base) + self.difference(&mm, base)) / (4.0 * h[j] * h[j]);
            for k in j + 1..n {
                let f = |a: f64, b: f64| self.evaluate_from(base, &Self::shifted(u, &[(j, a * h[j]), (k, b * h[k])]));
                let (pp, pm, mp, mm) = (f(1.0, 1.0)?, f(1.0, -1.0)?, f(-1.0, 1.0)?, f(-1.0, -1.0)?);
                let v = (self.difference(&pp, &pm) - self.difference(&mp, &mm)) / (4.0 * h[j] * h[k]);
                out[(j, k)] = v;
                out[(k, j)] = v;
            }
        }
        Ok(out)
    }

    /// Per-pair central-difference scores, `pairs x P`.
    pub fn pair_scores(&self, u: &[f64], base: &Evaluation, rel_step: f64) -> Result<DMatrix<f64>> {
        let m = self.model;
        let n_p = m.pairs().len();
        let mut s = DMatrix::zeros(n_p, u.len());
        for j in 0..u.len() {
            let h = rel_step * (1.0 + u[j].abs());
            let up = self.evaluate_from(base, &Self::shifted(u, &[(j, h)]))?;
            let dn = self.evaluate_from(base, &Self::shifted(u, &[(j, -h)]))?;
            for (p, &(q, r)) in m.pairs().iter().enumerate() {
                let d = (up.within[q] - dn.within[q]) + (up.within[r] - dn.within[r]) + (up.cross[p] - dn.cross[p]);
                s[(p, j)] = d / (2.0 * h);
            }
        }
        Ok(s)
    }
}

/// Robust covariance and information criterion at an optimum.
#[derive(Debug, Clone)]
pub struct Sandwich {
    /// Hessian of the composite log-likelihood (unconstrained scale).
    pub hessian: DMatrix<f64>,
    /// Window-sampled score outer-product matrix (unconstrained scale).
    pub jacobian: DMatrix<f64>,
    pub cov_unconstrained: DMatrix<f64>,
    /// Covariance of the free parameters on their natural scale.
    pub cov_natural: DMatrix<f64>,
    pub std_errors: Vec<f64>,
    pub penalty: f64,
    pub clic: f64,
    /// The Hessian was not negative definite; a pseudo-inverse was used.
    pub singular_hessian: bool,
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub params: IclvParams,
    pub unconstrained: Vec<f64>,
    /// Free parameters in natural-scale order.
    pub keys: Vec<ParamKey>,
    pub cml_loglik: f64,
    pub choice_loglik: f64,
    pub n_pairs: usize,
    pub floored: u64,
    pub convergence: Convergence,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective after each accepted iteration, starting at the initial point.
    pub history: Vec<f64>,
    pub sandwich: Option<Sandwich>,
}

impl EstimationResult {
    /// Composite log-likelihood per effective pair.
    pub fn loglik_per_pair(&self) -> f64 {
        self.cml_loglik / self.n_pairs as f64
    }

    /// Choice-model composite log-likelihood per effective pair.
    pub fn choice_loglik_per_pair(&self) -> f64 {
        self.choice_loglik / self.n_pairs as f64
    }

    pub fn clic(&self) -> Option<f64> {
        self.sandwich.as_ref().map(|s| s.clic)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Quasi-Newton (BFGS) ascent with backtracking Armijo line search on the
/// unconstrained parameters.
pub fn maximize_cml(
    sample: &Sample,
    w: &WeightMatrix,
    init: &IclvParams,
    options: &EstimateOptions,
) -> Result<EstimationResult> {
    let model = CmlModel::new(init, sample, w, options.cml)?;
    let obj = Objective::new(&model, init)?;
    let n = obj.reparam().len();
    let mut u = obj.reparam().to_unconstrained(init)?;
    let (mut f, mut e) = obj
        .evaluate(&u)
        .map_err(|err| Error::Estimation(format!("objective fails at the initial point: {err}")))?;
    if !f.is_finite() {
        return Err(Error::Estimation("non-finite objective at the initial point".into()));
    }
    let mut history = vec![f];
    let mut g = if n > 0 { obj.gradient(&u, &e, options.grad_step)? } else { vec![] };
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut convergence = Convergence::MaxIter;
    let mut iterations = 0;
    if n == 0 || max_abs(&g) < options.grad_tol {
        convergence = Convergence::Converged;
    }
    while convergence == Convergence::MaxIter && iterations < options.max_iter {
        let gv = DVector::from_column_slice(&g);
        let mut dir = &hinv * &gv;
        let mut slope = gv.dot(&dir);
        if !(slope > 0.0) {
            hinv = DMatrix::identity(n, n);
            fresh = true;
            dir = gv.clone();
            slope = gv.dot(&dir);
        }
        let mut alpha = if fresh { (1.0 / max_abs(dir.as_slice())).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..50 {
            let cand: Vec<f64> = u.iter().zip(dir.iter()).map(|(a, d)| a + alpha * d).collect();
            if let Ok(ec) = obj.evaluate_from(&e, &cand) {
                let fc = model.total(&ec);
                if fc.is_finite() && fc >= f + 1e-4 * alpha * slope {
                    accepted = Some((cand, fc, ec));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((un, fnew, en)) = accepted else {
            if fresh {
                convergence = Convergence::LineSearchFailure;
                break;
            }
            hinv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        iterations += 1;
        let gn = obj.gradient(&un, &en, options.grad_step)?;
        let s = DVector::from_iterator(n, un.iter().zip(&u).map(|(a, b)| a - b));
        // Minimisation convention on -f.
        let y = DVector::from_iterator(n, g.iter().zip(&gn).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if fresh {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let a = &i - &s * y.transpose() * rho;
            hinv = &a * &hinv * a.transpose() + &s * s.transpose() * rho;
            fresh = false;
        }
        let rel = (fnew - f).abs() / f.abs().max(1.0);
        u = un;
        f = fnew;
        e = en;
        g = gn;
        history.push(f);
        if max_abs(&g) < options.grad_tol || rel < options.rel_tol {
            convergence = Convergence::Converged;
        }
    }
    let params = obj.reparam().apply(&u)?;
    Ok(EstimationResult {
        keys: params.free_keys(),
        cml_loglik: f,
        choice_loglik: model.choice_total(&e),
        n_pairs: model.pairs().len(),
        floored: model.floored(&e),
        params,
        unconstrained: u,
        convergence,
        iterations,
        gradient_norm: max_abs(&g),
        history,
        sandwich: None,
    })
}

/// Window-sampled Jacobian: each individual's window holds it and its tied
/// partners; the window score sums the scores of all pairs inside it.
pub fn window_jacobian(model: &CmlModel, scores: &DMatrix<f64>) -> DMatrix<f64> {
    let q_n = model.sample().q();
    let n = scores.ncols();
    let pairs = model.pairs();
    let mut j = DMatrix::zeros(n, n);
    let mut inside = vec![false; q_n];
    for q in 0..q_n {
        let mut members = vec![q];
        for &p in model.pairs_of(q) {
            let (a, b) = pairs[p];
            members.push(if a == q { b } else { a });
        }
        for &m in &members {
            inside[m] = true;
        }
        let mut window: Vec<usize> = members
            .iter()
            .flat_map(|&m| model.pairs_of(m).iter().copied())
            .filter(|&p| inside[pairs[p].0] && inside[pairs[p].1])
            .collect();
        window.sort_unstable();
        window.dedup();
        for &m in &members {
            inside[m] = false;
        }
        if window.is_empty() {
            continue;
        }
        let mut score = DVector::zeros(n);
        for &p in &window {
            score += scores.row(p).transpose();
        }
        j += &score * score.transpose() / window.len() as f64;
    }
    j * (pairs.len() as f64 / q_n as f64)
}

/// Information criterion `loglik - tr(J (-H)^-1)` given the Hessian `h` of
/// the composite log-likelihood. Returns `(clic, penalty)`.
pub fn clic(loglik: f64, jacobian: &DMatrix<f64>, hessian: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (inv, _) = inverse_negative(hessian)?;
    let penalty = (jacobian * inv).trace();
    Ok((loglik - penalty, penalty))
}

/// `(-H)^-1`, falling back to a pseudo-inverse when `-H` is not positive
/// definite. The flag reports the fallback.
fn inverse_negative(hessian: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let neg = -hessian;
    let neg = (&neg + neg.transpose()) * 0.5;
    if let Some(ch) = neg.clone().cholesky() {
        return Ok((ch.inverse(), false));
    }
    let eps = 1e-10 * neg.abs().max().max(1e-300);
    let pinv = neg
        .pseudo_inverse(eps)
        .map_err(|e| Error::Estimation(format!("pseudo-inverse failed: {e}")))?;
    Ok((pinv, true))
}

/// Sandwich covariance `H^-1 J H^-1` at the estimate, with the Hessian from
/// finite differences of the gradient and the Jacobian from window sampling.
pub fn sandwich_covariance(
    result: &EstimationResult,
    sample: &Sample,
    w: &WeightMatrix,
    options: &EstimateOptions,
) -> Result<Sandwich> {
    let cml = CmlOptions {
        draws: options.final_draws,
        ..options.cml
    };
    let model = CmlModel::new(&result.params, sample, w, cml)?;
    let obj = Objective::new(&model, &result.params)?;
    let u = obj.reparam().to_unconstrained(&result.params)?;
    let (f, base) = obj.evaluate(&u)?;
    let hessian = obj.hessian(&u, &base, options.hess_step)?;
    let scores = obj.pair_scores(&u, &base, options.grad_step)?;
    let jacobian = window_jacobian(&model, &scores);
    let (hinv, singular) = inverse_negative(&hessian)?;
    let cov_u = &hinv * &jacobian * &hinv;
    let cov_u = (&cov_u + cov_u.transpose()) * 0.5;
    let g = obj.reparam().natural_jacobian(&u)?;
    let cov_n = &g * &cov_u * g.transpose();
    let cov_n = (&cov_n + cov_n.transpose()) * 0.5;
    let std_errors = (0..cov_n.nrows()).map(|i| cov_n[(i, i)].max(0.0).sqrt()).collect();
    let penalty = (&jacobian * &hinv).trace();
    Ok(Sandwich {
        hessian,
        jacobian,
        cov_unconstrained: cov_u,
        cov_natural: cov_n,
        std_errors,
        penalty,
        clic: f - penalty,
        singular_hessian: singular,
    })
}

/// Maximises the composite likelihood and attaches the sandwich covariance.
pub fn estimate(
    sample: &Sample,
    w: &WeightMatrix,
    init: &IclvParams,
    options: &EstimateOptions,
) -> Result<EstimationResult> {
    let mut res = maximize_cml(sample, w, init, options)?;
    let sw = sandwich_covariance(&res, sample, w, options)?;
    res.sandwich = Some(sw);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clic_with_information_equality() {
        let h = DMatrix::from_row_slice(3, 3, &[-4.0, 1.0, 0.5, 1.0, -3.0, 0.2, 0.5, 0.2, -2.0]);
        let j = -h.clone();
        let (c, pen) = clic(-100.0, &j, &h).unwrap();
        assert!((pen - 3.0).abs() < 1e-12);
        assert!((c - (-103.0)).abs() < 1e-12);
    }

    #[test]
    fn singular_hessian_uses_pseudo_inverse() {
        let h = DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, -1.0, -1.0]);
        let (inv, flag) = inverse_negative(&h).unwrap();
        assert!(flag);
        assert!((inv[(0, 0)] - 0.25).abs() < 1e-12);
    }
}
