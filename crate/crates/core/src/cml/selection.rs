//! Selection matrices for one pair and a literal pair log-likelihood built
//! from them on dense differenced moments. Slow; used as a reference for the
//! term-cached evaluator.

use nalgebra::{DMatrix, DVector};

use super::likelihood::PROBABILITY_FLOOR;
use crate::error::{Error, Result};
use crate::model::{DifferencedMoments, IclvParams, Sample};
use crate::mvn::{bvn_cdf, mvn_cdf_ghk, std_normal_cdf, CdfMethod, HaltonDraws, MvnSpec};

/// 0/1 selection matrices for pair `(q, r)`.
#[derive(Debug, Clone, Copy)]
pub struct PairSelection {
    pub q: usize,
    pub r: usize,
    /// Individuals in the sample.
    pub n_individuals: usize,
    /// Indicators per individual.
    pub h: usize,
    /// Tasks per individual.
    pub t: usize,
    /// Differenced utilities per task (`I - 1`).
    pub d: usize,
}

impl PairSelection {
    fn block(&self) -> usize {
        self.h + self.t * self.d
    }

    fn selector(rows: &[usize], cols: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(rows.len(), cols);
        for (i, &c) in rows.iter().enumerate() {
            m[(i, c)] = 1.0;
        }
        m
    }

    /// Extracts the pair's two blocks from the sample-wide differenced vector.
    pub fn d_matrix(&self) -> DMatrix<f64> {
        let n = self.block();
        let rows: Vec<usize> = (0..n).map(|k| self.q * n + k).chain((0..n).map(|k| self.r * n + k)).collect();
        Self::selector(&rows, self.n_individuals * n)
    }

    /// Reorders the pair vector to both indicator sets first, then both task sets.
    pub fn delta_matrix(&self) -> DMatrix<f64> {
        let n = self.block();
        let (h, td) = (self.h, self.t * self.d);
        let rows: Vec<usize> = (0..h)
            .chain((0..h).map(|k| n + k))
            .chain((0..td).map(|k| h + k))
            .chain((0..td).map(|k| n + h + k))
            .collect();
        Self::selector(&rows, 2 * n)
    }

    /// Picks the `2H` indicators from the rearranged vector.
    pub fn v_matrix(&self) -> DMatrix<f64> {
        let rows: Vec<usize> = (0..2 * self.h).collect();
        Self::selector(&rows, 2 * self.block())
    }

    /// Indicator `hh` (of `2H`) with task `tt` (of `2T`) from the rearranged vector.
    pub fn h_matrix(&self, hh: usize, tt: usize) -> DMatrix<f64> {
        let mut rows = vec![hh];
        rows.extend((0..self.d).map(|k| 2 * self.h + tt * self.d + k));
        Self::selector(&rows, 2 * self.block())
    }

    /// Tasks `t1` and `t2` (of `2T`) from the rearranged vector.
    pub fn e_matrix(&self, t1: usize, t2: usize) -> DMatrix<f64> {
        let rows: Vec<usize> = (0..self.d)
            .map(|k| 2 * self.h + t1 * self.d + k)
            .chain((0..self.d).map(|k| 2 * self.h + t2 * self.d + k))
            .collect();
        Self::selector(&rows, 2 * self.block())
    }
}

/// `P(X <= upper)` for a zero-mean normal vector.
fn orthant(method: CdfMethod, cov: &DMatrix<f64>, upper: &[f64], draws: &HaltonDraws) -> Result<f64> {
    if upper.iter().any(|&u| u == f64::NEG_INFINITY) {
        return Ok(0.0);
    }
    let keep: Vec<usize> = (0..upper.len()).filter(|&i| upper[i] < f64::INFINITY).collect();
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |i, j| cov[(keep[i], keep[j])]);
    let up: Vec<f64> = keep.iter().map(|&i| upper[i]).collect();
    match (method, keep.len()) {
        (_, 0) => Ok(1.0),
        (_, 1) => Ok(std_normal_cdf(up[0] / sub[(0, 0)].sqrt())),
        (CdfMethod::Auto, 2) => {
            let (s1, s2) = (sub[(0, 0)].sqrt(), sub[(1, 1)].sqrt());
            Ok(bvn_cdf(up[0] / s1, up[1] / s2, (sub[(0, 1)] / (s1 * s2)).clamp(-1.0, 1.0)))
        }
        _ => {
            let spec = MvnSpec::new(DVector::zeros(keep.len()), sub)?;
            mvn_cdf_ghk(&spec, &up, draws)
        }
    }
}

fn floor_log(p: f64) -> f64 {
    p.max(PROBABILITY_FLOOR).ln()
}

/// Pair log-likelihood from sample-wide differenced moments, following the
/// selection-matrix construction: indicator rectangles, indicator-by-task
/// differences and task-by-task orthants.
pub fn pair_loglik(
    params: &IclvParams,
    sample: &Sample,
    dm: &DifferencedMoments,
    q: usize,
    r: usize,
    method: CdfMethod,
    draws: &HaltonDraws,
) -> Result<f64> {
    let m = &params.measurement;
    let sel = PairSelection {
        q,
        r,
        n_individuals: sample.q(),
        h: m.n_indicators(),
        t: sample.n_tasks(),
        d: params.choice.n_alternatives() - 1,
    };
    let dd = sel.d_matrix();
    let delta = sel.delta_matrix();
    let b = &delta * &dd * &dm.b;
    let omega = &delta * &dd * &dm.omega * dd.transpose() * delta.transpose();
    if b.iter().chain(omega.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Conditioning(format!("non-finite moments for pair ({q}, {r})")));
    }
    let h = sel.h;
    let bounds = |hh: usize| -> (f64, f64) {
        let (who, k) = if hh < h { (q, hh) } else { (r, hh - h) };
        let y = sample.individuals[who].responses[k] as usize;
        (m.psi(k, y - 1), m.psi(k, y))
    };
    let mut ll = 0.0;

    let v = sel.v_matrix();
    let mu_v = &v * &b;
    let om_v = &v * &omega * v.transpose();
    for h1 in 0..2 * h {
        for h2 in h1 + 1..2 * h {
            let (l1, u1) = bounds(h1);
            let (l2, u2) = bounds(h2);
            let cov = DMatrix::from_row_slice(
                2,
                2,
                &[om_v[(h1, h1)], om_v[(h1, h2)], om_v[(h2, h1)], om_v[(h2, h2)]],
            );
            let c = |a: f64, bb: f64| orthant(method, &cov, &[a - mu_v[h1], bb - mu_v[h2]], draws);
            let p = c(u1, u2)? - c(u1, l2)? - c(l1, u2)? + c(l1, l2)?;
            ll += floor_log(p);
        }
    }

    let d = sel.d;
    for hh in 0..2 * h {
        let (lo, up) = bounds(hh);
        for tt in 0..2 * sel.t {
            let hm = sel.h_matrix(hh, tt);
            let mu = &hm * &b;
            let cov = &hm * &omega * hm.transpose();
            let mut upper: Vec<f64> = vec![up - mu[0]];
            upper.extend((1..=d).map(|k| -mu[k]));
            let mut lower = upper.clone();
            lower[0] = lo - mu[0];
            let p = orthant(method, &cov, &upper, draws)? - orthant(method, &cov, &lower, draws)?;
            ll += floor_log(p);
        }
    }

    for t1 in 0..2 * sel.t {
        for t2 in t1 + 1..2 * sel.t {
            let e = sel.e_matrix(t1, t2);
            let mu = &e * &b;
            let cov = &e * &omega * e.transpose();
            let upper: Vec<f64> = mu.iter().map(|x| -x).collect();
            ll += floor_log(orthant(method, &cov, &upper, draws)?);
        }
    }
    Ok(ll)
}
