//! GHK simulator for multivariate normal rectangle probabilities.

use nalgebra::{DMatrix, DVector};

use super::halton::HaltonDraws;
use super::normal::{bvn_rect, normal_interval, quantile_unchecked, std_normal_cdf};
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Mean and covariance of a multivariate normal.
#[derive(Debug, Clone, PartialEq)]
pub struct MvnSpec {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl MvnSpec {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::Schema(format!(
                "covariance is {}x{} but mean has length {d}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        for i in 0..d {
            if !(covariance[(i, i)] >= 0.0) {
                return Err(Error::Domain(format!("negative variance at {i}")));
            }
            for j in 0..i {
                let (a, b) = (covariance[(i, j)], covariance[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Domain(format!("covariance not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { mean, covariance })
    }

    pub fn standard(d: usize) -> Self {
        Self {
            mean: DVector::zeros(d),
            covariance: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Same distribution with coordinates reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let d = perm.len();
        Self {
            mean: DVector::from_fn(d, |i, _| self.mean[perm[i]]),
            covariance: DMatrix::from_fn(d, d, |i, j| self.covariance[(perm[i], perm[j])]),
        }
    }
}

/// Cholesky factor with escalating diagonal jitter.
pub(crate) fn jittered_cholesky(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = cov.clone().cholesky() {
        return Ok(c.l());
    }
    let d = cov.nrows();
    let scale = (cov.trace() / d as f64).max(f64::MIN_POSITIVE);
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        let mut m = cov.clone();
        for i in 0..d {
            m[(i, i)] += jitter * scale;
        }
        if let Some(c) = m.cholesky() {
            return Ok(c.l());
        }
        jitter *= 10.0;
    }
    Err(Error::Conditioning(format!(
        "covariance of dimension {d} is not positive semidefinite after jitter {JITTER_MAX}"
    )))
}

/// Core GHK recursion on a zero-mean problem with bounds `lower < X <= upper`.
/// Variables are taken greedily in order of the smallest conditional interval
/// probability.
fn ghk_core(
    cov: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    draws: &HaltonDraws,
) -> Result<f64> {
    let d = lower.len();
    let mut sigma = cov.clone();
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();

    // Ordering with an on-the-fly Cholesky (Genz-Bretz variable prioritisation).
    let mut chol = DMatrix::<f64>::zeros(d, d);
    let mut expected = vec![0.0; d];
    for i in 0..d {
        let mut best = i;
        let mut best_prob = f64::INFINITY;
        for j in i..d {
            let mut var = sigma[(j, j)];
            let mut shift = 0.0;
            for k in 0..i {
                var -= chol[(j, k)] * chol[(j, k)];
                shift += chol[(j, k)] * expected[k];
            }
            let sd = var.max(0.0).sqrt();
            let prob = if sd > 0.0 {
                normal_interval((lo[j] - shift) / sd, (hi[j] - shift) / sd)
            } else {
                1.0
            };
            if prob < best_prob {
                best_prob = prob;
                best = j;
            }
        }
        if best != i {
            sigma.swap_rows(i, best);
            sigma.swap_columns(i, best);
            chol.swap_rows(i, best);
            lo.swap(i, best);
            hi.swap(i, best);
        }
        let mut var = sigma[(i, i)];
        for k in 0..i {
            var -= chol[(i, k)] * chol[(i, k)];
        }
        if var < -1e-8 * sigma[(i, i)].abs().max(1e-300) {
            return Err(Error::Conditioning(format!(
                "negative pivot {var:e} in GHK ordering"
            )));
        }
        let pivot = var.max(0.0).sqrt();
        chol[(i, i)] = pivot;
        for j in (i + 1)..d {
            let mut s = sigma[(j, i)];
            for k in 0..i {
                s -= chol[(j, k)] * chol[(i, k)];
            }
            chol[(j, i)] = if pivot > 0.0 { s / pivot } else { 0.0 };
        }
        // Conditional mean of the truncated variable, used only for ordering.
        let mut shift = 0.0;
        for k in 0..i {
            shift += chol[(i, k)] * expected[k];
        }
        expected[i] = if pivot > 0.0 {
            let a = (lo[i] - shift) / pivot;
            let b = (hi[i] - shift) / pivot;
            truncated_mean(a, b)
        } else {
            0.0
        };
    }
    if chol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Conditioning("non-finite Cholesky factor in GHK".into()));
    }
    // Degenerate pivots fall back to the jittered factorisation.
    if (0..d).any(|i| chol[(i, i)] <= 0.0) {
        let l = jittered_cholesky(&sigma)?;
        chol = l;
    }

    if d == 1 {
        return Ok(normal_interval(lo[0] / chol[(0, 0)], hi[0] / chol[(0, 0)]));
    }
    if draws.dimension() + 1 < d {
        return Err(Error::Domain(format!(
            "GHK needs draws of dimension {} but got {}",
            d - 1,
            draws.dimension()
        )));
    }

    let first = normal_interval(lo[0] / chol[(0, 0)], hi[0] / chol[(0, 0)]);
    if first <= 0.0 {
        return Ok(0.0);
    }
    let a0 = std_normal_cdf(lo[0] / chol[(0, 0)]);
    let b0 = std_normal_cdf(hi[0] / chol[(0, 0)]);
    let mut total = 0.0;
    let mut eta = vec![0.0; d];
    for u in draws.points() {
        let mut weight = first;
        let (mut a, mut b) = (a0, b0);
        for i in 0..d {
            if i > 0 {
                let mut shift = 0.0;
                for k in 0..i {
                    shift += chol[(i, k)] * eta[k];
                }
                let ai = std_normal_cdf((lo[i] - shift) / chol[(i, i)]);
                let bi = std_normal_cdf((hi[i] - shift) / chol[(i, i)]);
                let pi = (bi - ai).max(0.0);
                weight *= pi;
                if weight <= 0.0 {
                    break;
                }
                a = ai;
                b = bi;
            }
            if i + 1 < d {
                let v = (a + u[i] * (b - a)).clamp(1e-300, 1.0 - 1e-16);
                eta[i] = quantile_unchecked(v);
            }
        }
        total += weight;
    }
    Ok((total / draws.count() as f64).clamp(0.0, 1.0))
}

fn truncated_mean(a: f64, b: f64) -> f64 {
    use super::normal::std_normal_pdf;
    let p = normal_interval(a, b);
    if p < 1e-300 {
        return if a.is_finite() { a } else if b.is_finite() { b } else { 0.0 };
    }
    let pa = if a.is_finite() { std_normal_pdf(a) } else { 0.0 };
    let pb = if b.is_finite() { std_normal_pdf(b) } else { 0.0 };
    (pa - pb) / p
}

/// `P(X <= upper)` for `X ~ spec`, estimated by GHK with the supplied draws.
pub fn mvn_cdf_ghk(spec: &MvnSpec, upper: &[f64], draws: &HaltonDraws) -> Result<f64> {
    let lower = vec![f64::NEG_INFINITY; spec.dim()];
    mvn_cdf_rect(spec, &lower, upper, draws)
}

/// `P(lower < X <= upper)` for `X ~ spec` by GHK.
pub fn mvn_cdf_rect(
    spec: &MvnSpec,
    lower: &[f64],
    upper: &[f64],
    draws: &HaltonDraws,
) -> Result<f64> {
    let d = spec.dim();
    if lower.len() != d || upper.len() != d {
        return Err(Error::Schema(format!(
            "bounds of length {}/{} for a {d}-dimensional normal",
            lower.len(),
            upper.len()
        )));
    }
    for i in 0..d {
        if lower[i] > upper[i] || lower[i].is_nan() || upper[i].is_nan() {
            return Err(Error::Domain(format!(
                "lower bound {} exceeds upper bound {} at coordinate {i}",
                lower[i], upper[i]
            )));
        }
    }
    if d == 0 {
        return Ok(1.0);
    }
    if (0..d).any(|i| lower[i] == upper[i]) {
        return Ok(0.0);
    }
    let lo: Vec<f64> = (0..d).map(|i| lower[i] - spec.mean[i]).collect();
    let hi: Vec<f64> = (0..d).map(|i| upper[i] - spec.mean[i]).collect();
    ghk_core(&spec.covariance, &lo, &hi, draws)
}

/// How multivariate normal rectangle probabilities are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CdfMethod {
    /// Closed-form routines up to two dimensions, GHK above.
    #[default]
    Auto,
    /// GHK in every dimension (one dimension is always exact).
    Ghk,
}

impl std::str::FromStr for CdfMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(CdfMethod::Auto),
            "ghk" => Ok(CdfMethod::Ghk),
            other => Err(Error::Config(format!("unknown cdf method '{other}'"))),
        }
    }
}

impl std::fmt::Display for CdfMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CdfMethod::Auto => "auto",
            CdfMethod::Ghk => "ghk",
        })
    }
}

/// Zero-mean rectangle probability dispatching on `method`.
pub fn rect_probability(
    method: CdfMethod,
    cov: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    draws: &HaltonDraws,
) -> Result<f64> {
    let d = lower.len();
    match (method, d) {
        (_, 0) => Ok(1.0),
        (_, 1) => {
            let sd = cov[(0, 0)].sqrt();
            Ok(normal_interval(lower[0] / sd, upper[0] / sd))
        }
        (CdfMethod::Auto, 2) => {
            let s1 = cov[(0, 0)].sqrt();
            let s2 = cov[(1, 1)].sqrt();
            let r = (cov[(0, 1)] / (s1 * s2)).clamp(-1.0, 1.0);
            Ok(bvn_rect(lower[0] / s1, upper[0] / s1, lower[1] / s2, upper[1] / s2, r))
        }
        _ => ghk_core(cov, lower, upper, draws),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvn::halton::{halton_sequence, DEFAULT_SKIP};
    use crate::mvn::normal::bvn_cdf;
    use std::f64::consts::PI;

    fn draws(dim: usize, n: usize) -> HaltonDraws {
        halton_sequence(dim, n, DEFAULT_SKIP).unwrap()
    }

    fn spec2(r: f64) -> MvnSpec {
        MvnSpec::new(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn univariate_half() {
        let p = mvn_cdf_ghk(&MvnSpec::standard(1), &[0.0], &draws(1, 10)).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn independent_quadrant() {
        let p = mvn_cdf_ghk(&spec2(0.0), &[0.0, 0.0], &draws(1, 1000)).unwrap();
        assert!((p - 0.25).abs() < 1e-4, "{p}");
    }

    #[test]
    fn correlated_quadrant() {
        let p = mvn_cdf_ghk(&spec2(0.5), &[0.0, 0.0], &draws(1, 1000)).unwrap();
        let exact = 0.25 + 0.5f64.asin() / (2.0 * PI);
        assert!((exact - 0.333_333_3).abs() < 1e-7);
        assert!((p - exact).abs() < 1e-3, "{p}");
    }

    #[test]
    fn rect_total_mass_and_degenerate() {
        let inf = f64::INFINITY;
        let d = draws(1, 100);
        let p = mvn_cdf_rect(&MvnSpec::standard(1), &[-inf], &[inf], &d).unwrap();
        assert_eq!(p, 1.0);
        let p = mvn_cdf_rect(&spec2(0.3), &[0.2, -1.0], &[0.2, 1.0], &d).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn rect_independent_box() {
        let p = mvn_cdf_rect(&spec2(0.0), &[-1.0, -1.0], &[1.0, 1.0], &draws(1, 1000)).unwrap();
        assert!((p - 0.466_064_9).abs() < 1e-3, "{p}");
    }

    #[test]
    fn rect_rejects_inverted_bounds() {
        let r = mvn_cdf_rect(&spec2(0.0), &[1.0, 0.0], &[0.0, 1.0], &draws(1, 10));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn mean_shift() {
        let spec = MvnSpec::new(
            DVector::from_vec(vec![1.0, -0.5]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.5]),
        )
        .unwrap();
        let p = mvn_cdf_ghk(&spec, &[1.3, 0.2], &draws(1, 1000)).unwrap();
        let s1 = 2f64.sqrt();
        let s2 = 1.5f64.sqrt();
        let exact = bvn_cdf(0.3 / s1, 0.7 / s2, 0.6 / (s1 * s2));
        assert!((p - exact).abs() < 1e-3);
    }

    #[test]
    fn trivariate_against_closed_form_orthant() {
        // Equicorrelated orthant: P = 1/8 + 3 asin(r)/(4 pi).
        let r = 0.4;
        let cov = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { r });
        let spec = MvnSpec::new(DVector::zeros(3), cov).unwrap();
        let p = mvn_cdf_ghk(&spec, &[0.0; 3], &draws(2, 2000)).unwrap();
        let exact = 0.125 + 3.0 * r.asin() / (4.0 * PI);
        assert!((p - exact).abs() < 2e-3, "{p} vs {exact}");
    }

    #[test]
    fn singular_covariance_uses_jitter() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let spec = MvnSpec::new(DVector::zeros(2), cov).unwrap();
        let p = mvn_cdf_ghk(&spec, &[0.0, 0.5], &draws(1, 500)).unwrap();
        assert!((p - 0.5).abs() < 1e-2, "{p}");
    }

    #[test]
    fn non_psd_fails() {
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        let spec = MvnSpec::new(DVector::zeros(3), cov).unwrap();
        let r = mvn_cdf_ghk(&spec, &[0.0; 3], &draws(2, 50));
        assert!(matches!(r, Err(Error::Conditioning(_))), "{r:?}");
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(MvnSpec::new(DVector::zeros(2), cov).is_err());
    }
}
