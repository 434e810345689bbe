//! Pairwise composite marginal likelihood over tied pairs.
//!
//! The log-likelihood of a pair `(q, r)` splits into terms that involve only
//! `q`'s variables, only `r`'s variables, and one variable group of each.
//! The first two kinds are shared by every pair an individual belongs to, so
//! they are evaluated once per individual and weighted by its pair count.
//! Every term keeps its inputs, which lets a perturbed evaluation recompute
//! only the terms whose inputs actually changed.

use std::rc::Rc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{
    build_differencing, build_spatial_operator, individual_loadings, IclvParams,
    LatentStructure, Sample, SpatialOperator,
};
use crate::mvn::{bvn_rect, halton_sequence, rect_probability, CdfMethod, HaltonDraws, DEFAULT_SKIP};
use crate::social::WeightMatrix;

/// Lower bound applied to every probability factor before taking logs.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Unordered tied pairs `(q, r)` with `q < r`: the union of both tie
/// directions, each pair once, sorted.
pub fn enumerate_pairs(w: &WeightMatrix) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = w
        .rows()
        .iter()
        .enumerate()
        .flat_map(|(q, row)| row.iter().map(move |&(r, _)| (q.min(r), q.max(r))))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

#[derive(Debug, Clone, Copy)]
pub struct CmlOptions {
    pub method: CdfMethod,
    /// Halton draws per GHK evaluation.
    pub draws: usize,
}

impl Default for CmlOptions {
    fn default() -> Self {
        Self {
            method: CdfMethod::Auto,
            draws: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    /// Two indicators.
    Ordinal,
    /// One indicator and one choice task.
    Mixed,
    /// Two choice tasks.
    Choice,
}

#[derive(Debug, Clone)]
struct Layout {
    /// `(first variable, length)` of each group: indicators, then tasks.
    groups: Vec<(usize, usize)>,
    n_ordinal: usize,
    within: Vec<(usize, usize, TermKind)>,
    cross: Vec<(usize, usize, TermKind)>,
}

impl Layout {
    fn new(h: usize, t: usize, d: usize) -> Self {
        let mut groups: Vec<(usize, usize)> = (0..h).map(|k| (k, 1)).collect();
        groups.extend((0..t).map(|k| (h + k * d, d)));
        let kind = |a: usize, b: usize| match (a < h, b < h) {
            (true, true) => TermKind::Ordinal,
            (false, false) => TermKind::Choice,
            _ => TermKind::Mixed,
        };
        let n = groups.len();
        let mut within = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                within.push((a, b, kind(a, b)));
            }
        }
        let mut cross = Vec::new();
        for a in 0..n {
            for b in 0..n {
                cross.push((a, b, kind(a, b)));
            }
        }
        Self {
            groups,
            n_ordinal: h,
            within,
            cross,
        }
    }
}

/// Differenced moments of one individual.
#[derive(Debug, Clone, PartialEq)]
struct IndState {
    lo: Vec<f64>,
    hi: Vec<f64>,
    omega: DMatrix<f64>,
}

#[derive(Debug)]
struct LatentCache {
    spatial: Rc<SpatialOperator>,
    delta: Vec<f64>,
    gamma: DMatrix<f64>,
    rho: Vec<f64>,
    /// `Xi_qq` per individual.
    own: Vec<DMatrix<f64>>,
    /// `Xi_qr` per pair.
    pair: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
struct State {
    latent: Rc<LatentCache>,
    ind: Vec<IndState>,
    cross: Vec<DMatrix<f64>>,
}

/// Log-likelihood components at one parameter point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    state: State,
    within_terms: Vec<Vec<f64>>,
    cross_terms: Vec<Vec<f64>>,
    within_floored: Vec<u32>,
    cross_floored: Vec<u32>,
    /// Sum of an individual's own terms.
    pub within: Vec<f64>,
    /// Sum of a pair's cross terms.
    pub cross: Vec<f64>,
    pub within_choice: Vec<f64>,
    pub cross_choice: Vec<f64>,
}

/// Composite likelihood problem on a fixed sample and tie structure.
#[derive(Debug)]
pub struct CmlModel<'a> {
    sample: &'a Sample,
    w: &'a WeightMatrix,
    pairs: Vec<(usize, usize)>,
    pairs_of: Vec<Vec<usize>>,
    multiplicity: Vec<f64>,
    layout: Layout,
    diff_blocks: Vec<DMatrix<f64>>,
    options: CmlOptions,
    draws: HaltonDraws,
}

fn encode(
    out: &mut Vec<f64>,
    va: (usize, usize),
    sa: &IndState,
    vb: (usize, usize),
    sb: &IndState,
    cov_ab: &DMatrix<f64>,
) {
    out.clear();
    let idx = |k: usize| -> (bool, usize) {
        if k < va.1 {
            (true, va.0 + k)
        } else {
            (false, vb.0 + k - va.1)
        }
    };
    let d = va.1 + vb.1;
    for k in 0..d {
        let (a, v) = idx(k);
        out.push(if a { sa.lo[v] } else { sb.lo[v] });
    }
    for k in 0..d {
        let (a, v) = idx(k);
        out.push(if a { sa.hi[v] } else { sb.hi[v] });
    }
    for i in 0..d {
        for j in i..d {
            let c = match (idx(i), idx(j)) {
                ((true, x), (true, y)) => sa.omega[(x, y)],
                ((false, x), (false, y)) => sb.omega[(x, y)],
                ((true, x), (false, y)) => cov_ab[(x, y)],
                ((false, x), (true, y)) => cov_ab[(y, x)],
            };
            out.push(c);
        }
    }
}

/// Which inputs of one individual moved relative to a base state.
struct Moved {
    mean: Vec<bool>,
    cov: DMatrix<bool>,
}

impl Moved {
    fn new(s: &IndState, b: &IndState) -> Self {
        let mean = s
            .lo
            .iter()
            .zip(&s.hi)
            .zip(b.lo.iter().zip(&b.hi))
            .map(|((l, h), (bl, bh))| l.to_bits() != bl.to_bits() || h.to_bits() != bh.to_bits())
            .collect();
        Self {
            mean,
            cov: moved_matrix(&s.omega, &b.omega),
        }
    }
}

fn moved_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<bool> {
    a.zip_map(b, |x, y| x.to_bits() != y.to_bits())
}

/// Whether any input of the term over groups `va` and `vb` moved.
fn term_moved(va: (usize, usize), ma: &Moved, vb: (usize, usize), mb: &Moved, cross: &DMatrix<bool>) -> bool {
    let idx = |k: usize| -> (bool, usize) {
        if k < va.1 {
            (true, va.0 + k)
        } else {
            (false, vb.0 + k - va.1)
        }
    };
    let d = va.1 + vb.1;
    for i in 0..d {
        let moved = match idx(i) {
            (true, x) => ma.mean[x],
            (false, y) => mb.mean[y],
        };
        if moved {
            return true;
        }
        for j in i..d {
            let moved = match (idx(i), idx(j)) {
                ((true, x), (true, y)) => ma.cov[(x, y)],
                ((false, x), (false, y)) => mb.cov[(x, y)],
                ((true, x), (false, y)) => cross[(x, y)],
                ((false, x), (true, y)) => cross[(y, x)],
            };
            if moved {
                return true;
            }
        }
    }
    false
}

impl<'a> CmlModel<'a> {
    pub fn new(
        params: &IclvParams,
        sample: &'a Sample,
        w: &'a WeightMatrix,
        options: CmlOptions,
    ) -> Result<Self> {
        params.validate()?;
        sample.validate(params)?;
        if w.q() != sample.q() {
            return Err(Error::Schema(format!(
                "weight matrix covers {} individuals, sample has {}",
                w.q(),
                sample.q()
            )));
        }
        let pairs = enumerate_pairs(w);
        let mut pairs_of = vec![Vec::new(); sample.q()];
        for (p, &(q, r)) in pairs.iter().enumerate() {
            pairs_of[q].push(p);
            pairs_of[r].push(p);
        }
        let multiplicity = pairs_of.iter().map(|v| v.len() as f64).collect();
        let h = params.measurement.n_indicators();
        let d = params.choice.n_alternatives() - 1;
        let t = sample.n_tasks();
        let layout = Layout::new(h, t, d);
        let dm = build_differencing(params, sample);
        let diff_blocks = (0..sample.q()).map(|q| dm.block(q)).collect();
        let max_dim = 2 * d.max(1);
        let draws = halton_sequence((max_dim - 1).max(1), options.draws.max(1), DEFAULT_SKIP)?;
        Ok(Self {
            sample,
            w,
            pairs,
            pairs_of,
            multiplicity,
            layout,
            diff_blocks,
            options,
            draws,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Pair indices involving individual `q`.
    pub fn pairs_of(&self, q: usize) -> &[usize] {
        &self.pairs_of[q]
    }

    pub fn sample(&self) -> &Sample {
        self.sample
    }

    pub fn weights(&self) -> &WeightMatrix {
        self.w
    }

    pub fn options(&self) -> CmlOptions {
        self.options
    }

    fn latent_cache(&self, params: &IclvParams, prev: Option<&Rc<LatentCache>>) -> Result<(LatentStructure, Rc<LatentCache>)> {
        let s = &params.structural;
        let rho: Vec<f64> = s.cross_loadings.iter().map(|c| c.value).collect();
        let spatial = match prev {
            Some(c) if c.delta == s.delta => Rc::clone(&c.spatial),
            _ => Rc::new(build_spatial_operator(self.w, &s.delta)?),
        };
        let ls = LatentStructure::with_spatial(s, self.sample, self.w, Rc::clone(&spatial))?;
        if let Some(c) = prev {
            if c.delta == s.delta && c.gamma == s.gamma && c.rho == rho {
                return Ok((ls, Rc::clone(c)));
            }
        }
        let own = (0..self.sample.q()).map(|q| ls.block(self.w, q, q)).collect();
        let pair = self
            .pairs
            .iter()
            .map(|&(q, r)| ls.block(self.w, q, r))
            .collect();
        Ok((
            ls,
            Rc::new(LatentCache {
                spatial,
                delta: s.delta.clone(),
                gamma: s.gamma.clone(),
                rho,
                own,
                pair,
            }),
        ))
    }

    fn state(&self, params: &IclvParams, prev: Option<&State>) -> Result<State> {
        let (ls, latent) = self.latent_cache(params, prev.map(|s| &s.latent))?;
        let m = &params.measurement;
        let h = m.n_indicators();
        let mut ind = Vec::with_capacity(self.sample.q());
        let mut mu2bars = Vec::with_capacity(self.sample.q());
        for (q, person) in self.sample.individuals.iter().enumerate() {
            let il = individual_loadings(params, person);
            let mq = &self.diff_blocks[q];
            let mu1 = mq * &il.mu1;
            let mu2 = mq * &il.mu2;
            let sigma = mq * &il.sigma * mq.transpose();
            let b: DVector<f64> = &mu1 + &mu2 * &ls.theta[q];
            let omega = &mu2 * &latent.own[q] * mu2.transpose() + sigma;
            let n = b.len();
            let mut lo = vec![f64::NEG_INFINITY; n];
            let mut hi = vec![0.0; n];
            for v in 0..n {
                if v < h {
                    let y = person.responses[v] as usize;
                    lo[v] = m.psi(v, y - 1) - b[v];
                    hi[v] = m.psi(v, y) - b[v];
                } else {
                    hi[v] = -b[v];
                }
            }
            if lo.iter().chain(&hi).any(|x| x.is_nan()) || omega.iter().any(|x| !x.is_finite()) {
                return Err(Error::Conditioning(format!(
                    "non-finite moments for individual '{}'",
                    person.id
                )));
            }
            ind.push(IndState { lo, hi, omega });
            mu2bars.push(mu2);
        }
        let cross = self
            .pairs
            .iter()
            .zip(&latent.pair)
            .map(|(&(q, r), xi)| &mu2bars[q] * xi * mu2bars[r].transpose())
            .collect();
        Ok(State { latent, ind, cross })
    }

    fn term_value(&self, enc: &[f64], d: usize) -> Result<(f64, bool)> {
        let lo = &enc[..d];
        let hi = &enc[d..2 * d];
        let tri = &enc[2 * d..];
        let p = if d == 2 && self.options.method == CdfMethod::Auto {
            let s1 = tri[0].sqrt();
            let s2 = tri[2].sqrt();
            let r = (tri[1] / (s1 * s2)).clamp(-1.0, 1.0);
            bvn_rect(lo[0] / s1, hi[0] / s1, lo[1] / s2, hi[1] / s2, r)
        } else {
            let mut cov = DMatrix::zeros(d, d);
            let mut k = 0;
            for i in 0..d {
                for j in i..d {
                    cov[(i, j)] = tri[k];
                    cov[(j, i)] = tri[k];
                    k += 1;
                }
            }
            rect_probability(self.options.method, &cov, lo, hi, &self.draws)?
        };
        if !p.is_finite() {
            return Err(Error::Conditioning("non-finite pair probability".into()));
        }
        if p < PROBABILITY_FLOOR {
            Ok((PROBABILITY_FLOOR.ln(), true))
        } else {
            Ok((p.ln(), false))
        }
    }

    /// Evaluates every term at `params`.
    pub fn evaluate(&self, params: &IclvParams) -> Result<Evaluation> {
        let state = self.state(params, None)?;
        self.terms(state, None)
    }

    /// Evaluates at `params`, reusing all terms of `base` whose inputs are
    /// bitwise unchanged.
    pub fn evaluate_from(&self, base: &Evaluation, params: &IclvParams) -> Result<Evaluation> {
        let state = self.state(params, Some(&base.state))?;
        self.terms(state, Some(base))
    }

    fn terms(&self, state: State, base: Option<&Evaluation>) -> Result<Evaluation> {
        let g = &self.layout.groups;
        let q_n = self.sample.q();
        let mut enc = Vec::new();
        let moved: Option<Vec<Moved>> =
            base.map(|b| state.ind.iter().zip(&b.state.ind).map(|(s, bs)| Moved::new(s, bs)).collect());
        let mut within_terms = Vec::with_capacity(q_n);
        let mut within_floored = Vec::with_capacity(q_n);
        let mut within = Vec::with_capacity(q_n);
        let mut within_choice = Vec::with_capacity(q_n);
        for q in 0..q_n {
            let s = &state.ind[q];
            if let Some(b) = base {
                if b.state.ind[q] == *s {
                    within_terms.push(b.within_terms[q].clone());
                    within_floored.push(b.within_floored[q]);
                    within.push(b.within[q]);
                    within_choice.push(b.within_choice[q]);
                    continue;
                }
            }
            let mut vals = Vec::with_capacity(self.layout.within.len());
            let (mut sum, mut choice, mut floored) = (0.0, 0.0, 0u32);
            for (k, &(a, bgrp, kind)) in self.layout.within.iter().enumerate() {
                let reuse = base.zip(moved.as_ref()).and_then(|(b, mv)| {
                    let m = &mv[q];
                    (!term_moved(g[a], m, g[bgrp], m, &m.cov)).then(|| b.within_terms[q][k])
                });
                let (v, fl) = match reuse {
                    Some(v) => (v, v == PROBABILITY_FLOOR.ln()),
                    None => {
                        encode(&mut enc, g[a], s, g[bgrp], s, &s.omega);
                        self.term_value(&enc, g[a].1 + g[bgrp].1)
                    }
                    .map_err(|e| {
                        Error::Conditioning(format!(
                            "individual '{}': {e}",
                            self.sample.individuals[q].id
                        ))
                    })?,
                };
                vals.push(v);
                sum += v;
                if kind == TermKind::Choice {
                    choice += v;
                }
                floored += fl as u32;
            }
            within_terms.push(vals);
            within_floored.push(floored);
            within.push(sum);
            within_choice.push(choice);
        }
        let n_p = self.pairs.len();
        let mut cross_terms = Vec::with_capacity(n_p);
        let mut cross_floored = Vec::with_capacity(n_p);
        let mut cross = Vec::with_capacity(n_p);
        let mut cross_choice = Vec::with_capacity(n_p);
        for (p, &(q, r)) in self.pairs.iter().enumerate() {
            let (sq, sr, c) = (&state.ind[q], &state.ind[r], &state.cross[p]);
            if let Some(b) = base {
                if b.state.cross[p] == *c && b.state.ind[q] == *sq && b.state.ind[r] == *sr {
                    cross_terms.push(b.cross_terms[p].clone());
                    cross_floored.push(b.cross_floored[p]);
                    cross.push(b.cross[p]);
                    cross_choice.push(b.cross_choice[p]);
                    continue;
                }
            }
            let cross_moved = base.map(|b| moved_matrix(c, &b.state.cross[p]));
            let mut vals = Vec::with_capacity(self.layout.cross.len());
            let (mut sum, mut choice, mut floored) = (0.0, 0.0, 0u32);
            for (k, &(a, bgrp, kind)) in self.layout.cross.iter().enumerate() {
                let reuse = base.zip(moved.as_ref()).zip(cross_moved.as_ref()).and_then(|((b, mv), cm)| {
                    (!term_moved(g[a], &mv[q], g[bgrp], &mv[r], cm)).then(|| b.cross_terms[p][k])
                });
                let (v, fl) = match reuse {
                    Some(v) => (v, v == PROBABILITY_FLOOR.ln()),
                    None => {
                        encode(&mut enc, g[a], sq, g[bgrp], sr, c);
                        self.term_value(&enc, g[a].1 + g[bgrp].1)
                    }
                    .map_err(|e| {
                        Error::Conditioning(format!(
                            "pair ('{}', '{}'): {e}",
                            self.sample.individuals[q].id, self.sample.individuals[r].id
                        ))
                    })?,
                };
                vals.push(v);
                sum += v;
                if kind == TermKind::Choice {
                    choice += v;
                }
                floored += fl as u32;
            }
            cross_terms.push(vals);
            cross_floored.push(floored);
            cross.push(sum);
            cross_choice.push(choice);
        }
        Ok(Evaluation {
            state,
            within_terms,
            cross_terms,
            within_floored,
            cross_floored,
            within,
            cross,
            within_choice,
            cross_choice,
        })
    }

    /// Total composite log-likelihood of an evaluation.
    pub fn total(&self, e: &Evaluation) -> f64 {
        let w: f64 = e.within.iter().zip(&self.multiplicity).map(|(v, m)| v * m).sum();
        w + e.cross.iter().sum::<f64>()
    }

    /// Composite log-likelihood of the choice-task terms only.
    pub fn choice_total(&self, e: &Evaluation) -> f64 {
        let w: f64 = e
            .within_choice
            .iter()
            .zip(&self.multiplicity)
            .map(|(v, m)| v * m)
            .sum();
        w + e.cross_choice.iter().sum::<f64>()
    }

    /// Number of probability factors that hit the floor, counted per pair.
    pub fn floored(&self, e: &Evaluation) -> u64 {
        let w: u64 = e
            .within_floored
            .iter()
            .zip(&self.pairs_of)
            .map(|(&f, ps)| f as u64 * ps.len() as u64)
            .sum();
        w + e.cross_floored.iter().map(|&f| f as u64).sum::<u64>()
    }

    /// Log-likelihood of pair `p`.
    pub fn pair_value(&self, e: &Evaluation, p: usize) -> f64 {
        let (q, r) = self.pairs[p];
        e.within[q] + e.within[r] + e.cross[p]
    }

    /// Per-pair log-likelihoods.
    pub fn pair_values(&self, e: &Evaluation) -> Vec<f64> {
        (0..self.pairs.len()).map(|p| self.pair_value(e, p)).collect()
    }

    /// Marginal probability that indicator `h` of individual `q` falls in
    /// each category, from the same moments the likelihood uses.
    pub fn category_probabilities(&self, e: &Evaluation, params: &IclvParams, q: usize, h: usize) -> Vec<f64> {
        let s = &e.state.ind[q];
        let y = self.sample.individuals[q].responses[h] as usize;
        let mean = if s.hi[h].is_finite() {
            params.measurement.psi(h, y) - s.hi[h]
        } else {
            params.measurement.psi(h, y - 1) - s.lo[h]
        };
        let sd = s.omega[(h, h)].sqrt();
        (1..=params.measurement.categories)
            .map(|j| {
                let lo = (params.measurement.psi(h, j - 1) - mean) / sd;
                let hi = (params.measurement.psi(h, j) - mean) / sd;
                crate::mvn::normal_interval(lo, hi)
            })
            .collect()
    }

    pub fn n_ordinal(&self) -> usize {
        self.layout.n_ordinal
    }
}

/// Summary of the composite likelihood at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmlValue {
    pub loglik: f64,
    pub choice_loglik: f64,
    pub n_pairs: usize,
    pub floored: u64,
}

/// Composite log-likelihood of `params` on `sample`.
pub fn cml_loglik(
    params: &IclvParams,
    sample: &Sample,
    w: &WeightMatrix,
    options: CmlOptions,
) -> Result<CmlValue> {
    let model = CmlModel::new(params, sample, w, options)?;
    let e = model.evaluate(params)?;
    Ok(CmlValue {
        loglik: model.total(&e),
        choice_loglik: model.choice_total(&e),
        n_pairs: model.pairs().len(),
        floored: model.floored(&e),
    })
}
