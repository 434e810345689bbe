//! Agent-based yearly adoption simulation driven by a calibrated model.
//!
//! Each simulated year updates the control variables (price, crash and
//! liability information, media reach), evaluates the latent variables of
//! every agent at their structural mean, converts the differenced utility
//! into a purchase probability and applies the stochastic purchase rule.
//! Adopters later broadcast their post-purchase experience by pinning their
//! word-of-mouth value to the extreme of their ties.

mod control;
mod population;

pub use control::{info_value, media_fraction, media_target, price_at};
pub use population::{synthetic_population, zip_areas, SYNTHETIC_ZIPS, TIE_COVARIATES};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{choice_utility_systematic, IclvParams};
use crate::mvn::std_normal_cdf;
use crate::social::{AttributeValue, GeoPoint, IndividualProfile, WeightMatrix};

/// Friend information is received when strictly more than this share of an
/// agent's ties have adopted.
pub const FRIEND_THRESHOLD: f64 = 0.40;

/// Scenario control variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub starting_price: f64,
    pub yearly_discount_rate: f64,
    pub proportion_satisfied: f64,
    pub curvature_crash: f64,
    pub curvature_legal: f64,
    /// Crashes per 100 million miles in year zero.
    pub crash_upper: f64,
    /// Percentage of crashes with unclear liability in year zero.
    pub legal_upper: f64,
    pub horizon_years: usize,
    pub seeds: Vec<u64>,
    /// Common conventional-car price; per-agent prices are used when absent.
    pub cv_price: Option<f64>,
    /// Spatial parameters forced to zero and adopter feedback switched off.
    pub independent: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "baseline".into(),
            starting_price: 40_000.0,
            yearly_discount_rate: 0.05,
            proportion_satisfied: 0.9,
            curvature_crash: 1.10,
            curvature_legal: 5.00,
            crash_upper: 415.0,
            legal_upper: 30.0,
            horizon_years: 30,
            seeds: (1..=10).collect(),
            cv_price: None,
            independent: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("scenario '{}': {m}", self.name)));
        if !(self.starting_price > 0.0) {
            return bad("starting price must be positive".into());
        }
        if !(0.0..1.0).contains(&self.yearly_discount_rate) {
            return bad("yearly discount rate must lie in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.proportion_satisfied) {
            return bad("proportion satisfied must lie in [0, 1]".into());
        }
        if !(self.curvature_crash > 0.0) || !(self.curvature_legal > 0.0) {
            return bad("curvatures must be positive".into());
        }
        if !(self.crash_upper > 0.0) || !(self.legal_upper > 0.0) {
            return bad("upper limits must be positive".into());
        }
        if self.horizon_years == 0 {
            return bad("horizon must be at least one year".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if let Some(p) = self.cv_price {
            if !(p > 0.0) {
                return bad("conventional-car price must be positive".into());
            }
        }
        Ok(())
    }
}

/// Static description of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: String,
    pub zip: String,
    pub location: Option<GeoPoint>,
    pub cv_price: f64,
    /// Profile covariates by name, matching the structural equations.
    pub covariates: BTreeMap<String, f64>,
}

impl Agent {
    /// Profile used to build social ties; every covariate is treated as
    /// continuous.
    pub fn profile(&self, names: &[String]) -> Result<IndividualProfile> {
        let attributes = names
            .iter()
            .map(|n| {
                self.covariates
                    .get(n)
                    .map(|&v| (n.clone(), AttributeValue::Continuous(v)))
                    .ok_or_else(|| {
                        Error::Schema(format!("agent '{}' lacks covariate '{n}'", self.id))
                    })
            })
            .collect::<Result<_>>()?;
        Ok(IndividualProfile {
            id: self.id.clone(),
            zip_centroid: self.location,
            attributes,
        })
    }
}

/// Mutable per-agent state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentState {
    pub adopted: bool,
    pub adoption_year: Option<usize>,
    pub satisfied: Option<bool>,
    /// Latent values of the latest year, one per latent.
    pub latents: Vec<f64>,
    pub media_reached: bool,
    pub friend_reached: bool,
}

/// Names tying the model's covariates and attributes to simulated quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimBindings {
    /// Latent variable receiving adopter feedback.
    pub wom_latent: String,
    pub crash: String,
    pub legal: String,
    pub friend: String,
    pub media: String,
    pub constant: String,
    pub network_share: String,
    pub city_share: String,
    pub price_ratio: String,
    /// Alternative representing the new product.
    pub product: String,
}

impl Default for SimBindings {
    fn default() -> Self {
        Self {
            wom_latent: "wom".into(),
            crash: "crashes".into(),
            legal: "liability".into(),
            friend: "src_friend".into(),
            media: "src_media".into(),
            constant: "const".into(),
            network_share: "network_share".into(),
            city_share: "city_share".into(),
            price_ratio: "price_ratio".into(),
            product: "av".into(),
        }
    }
}

/// Control values of one simulated year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearInputs {
    pub av_price: f64,
    /// Crashes per 100 million miles.
    pub crash_value: f64,
    /// Percentage of crashes with unclear liability.
    pub legal_value: f64,
    /// Cumulative percentage of agents reached by media.
    pub media_fraction: f64,
}

impl YearInputs {
    pub fn for_year(cfg: &ScenarioConfig, t: usize) -> Self {
        Self {
            av_price: price_at(cfg.starting_price, cfg.yearly_discount_rate, t),
            crash_value: info_value(cfg.crash_upper, cfg.curvature_crash, t),
            legal_value: info_value(cfg.legal_upper, cfg.curvature_legal, t),
            media_fraction: media_fraction(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearRecord {
    pub year: usize,
    pub city_share: f64,
    pub network_share: Vec<f64>,
    pub new_adopters: usize,
    pub av_price: f64,
    pub crash_value: f64,
    pub legal_value: f64,
    pub media_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<YearRecord>,
    pub states: Vec<AgentState>,
}

impl SeedRun {
    pub fn city_shares(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.city_share).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub runs: Vec<SeedRun>,
    /// Across-seed mean city share per year.
    pub mean_city_share: Vec<f64>,
    /// Across-seed standard deviation of the city share per year.
    pub sd_city_share: Vec<f64>,
}

impl ScenarioResult {
    /// Years until the mean share first reaches `level`, interpolating
    /// linearly between year ends (the share is zero at year 0).
    pub fn years_to(&self, level: f64) -> Option<f64> {
        years_to(&self.mean_city_share, level)
    }
}

pub fn years_to(shares: &[f64], level: f64) -> Option<f64> {
    let mut prev = 0.0;
    for (i, &s) in shares.iter().enumerate() {
        if s >= level {
            let frac = if s > prev { (level - prev) / (s - prev) } else { 1.0 };
            return Some(i as f64 + frac.clamp(0.0, 1.0));
        }
        prev = s;
    }
    None
}

/// Dynamic structural coefficient: `(latent, alpha)`.
type Slot = Vec<(usize, f64)>;

/// A calibrated model bound to a population and its tie matrix.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: IclvParams,
    agents: Vec<Agent>,
    w: WeightMatrix,
    wom: usize,
    /// `static_mean[l][i]`: structural mean of latent `l` from profile covariates.
    static_mean: Vec<Vec<f64>>,
    crash: Slot,
    legal: Slot,
    friend: Slot,
    media: Slot,
    product: usize,
    attr_const: Option<usize>,
    attr_network: Option<usize>,
    attr_city: Option<usize>,
    attr_price: Option<usize>,
}

/// Structural covariates of the crash and liability variables are entered
/// on this scale (hundreds of crashes, liability share as a fraction).
pub const INFO_SCALE: f64 = 0.01;

impl Simulator {
    pub fn new(
        params: &IclvParams,
        agents: Vec<Agent>,
        w: WeightMatrix,
        bindings: &SimBindings,
    ) -> Result<Self> {
        params.validate()?;
        let s = &params.structural;
        let c = &params.choice;
        if agents.len() != w.q() {
            return Err(Error::Schema(format!(
                "{} agents but the tie matrix has {} rows",
                agents.len(),
                w.q()
            )));
        }
        if c.n_alternatives() != 2 {
            return Err(Error::Config("simulation needs a binary choice".into()));
        }
        let wom = s
            .latents
            .iter()
            .position(|n| *n == bindings.wom_latent)
            .ok_or_else(|| Error::Config(format!("unknown latent '{}'", bindings.wom_latent)))?;
        if s.cross_loadings.iter().any(|cl| cl.target == wom) {
            return Err(Error::Config(
                "the feedback latent must not receive cross-loadings".into(),
            ));
        }
        let product = c
            .alternatives
            .iter()
            .position(|n| *n == bindings.product)
            .ok_or_else(|| Error::Config(format!("unknown alternative '{}'", bindings.product)))?;
        if product == c.base_alternative {
            return Err(Error::Config("the product cannot be the base alternative".into()));
        }
        let dynamic = [&bindings.crash, &bindings.legal, &bindings.friend, &bindings.media];
        let slot = |name: &str| -> Slot {
            let mut v = Vec::new();
            for (l, cov) in s.covariates.iter().enumerate() {
                for (k, n) in cov.iter().enumerate() {
                    if n == name {
                        v.push((l, s.alpha[l][k]));
                    }
                }
            }
            v
        };
        let mut static_mean = vec![vec![0.0; agents.len()]; s.n_latent()];
        for (l, cov) in s.covariates.iter().enumerate() {
            for (k, name) in cov.iter().enumerate() {
                if dynamic.iter().any(|d| *d == name) {
                    continue;
                }
                for (i, a) in agents.iter().enumerate() {
                    let x = a.covariates.get(name).ok_or_else(|| {
                        Error::Schema(format!("agent '{}' lacks covariate '{name}'", a.id))
                    })?;
                    if !x.is_finite() {
                        return Err(Error::Schema(format!(
                            "agent '{}' has a non-finite '{name}'",
                            a.id
                        )));
                    }
                    static_mean[l][i] += s.alpha[l][k] * x;
                }
            }
        }
        let attr = |name: &str| c.attributes.iter().position(|n| n == name);
        let known = [
            &bindings.constant,
            &bindings.network_share,
            &bindings.city_share,
            &bindings.price_ratio,
        ];
        if let Some(other) = c.attributes.iter().find(|a| !known.contains(a)) {
            return Err(Error::Config(format!(
                "choice attribute '{other}' has no simulated counterpart"
            )));
        }
        for a in &agents {
            if !(a.cv_price > 0.0) {
                return Err(Error::Schema(format!(
                    "agent '{}' has a non-positive conventional-car price",
                    a.id
                )));
            }
        }
        Ok(Self {
            params: params.clone(),
            agents,
            w,
            wom,
            static_mean,
            crash: slot(&bindings.crash),
            legal: slot(&bindings.legal),
            friend: slot(&bindings.friend),
            media: slot(&bindings.media),
            product,
            attr_const: attr(&bindings.constant),
            attr_network: attr(&bindings.network_share),
            attr_city: attr(&bindings.city_share),
            attr_price: attr(&bindings.price_ratio),
        })
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.w
    }

    pub fn params(&self) -> &IclvParams {
        &self.params
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Structural means of all latents for the year's inputs, before spatial
    /// propagation and cross-loadings.
    pub fn structural_means(&self, inputs: &YearInputs, states: &[AgentState]) -> Vec<Vec<f64>> {
        let mut m = self.static_mean.clone();
        let crash = inputs.crash_value * INFO_SCALE;
        let legal = inputs.legal_value * INFO_SCALE;
        for (slot, value) in [(&self.crash, crash), (&self.legal, legal)] {
            for &(l, a) in slot {
                m[l].iter_mut().for_each(|x| *x += a * value);
            }
        }
        for (i, st) in states.iter().enumerate() {
            if st.friend_reached {
                for &(l, a) in &self.friend {
                    m[l][i] += a;
                }
            }
            if st.media_reached {
                for &(l, a) in &self.media {
                    m[l][i] += a;
                }
            }
        }
        m
    }

    /// Latent values at the structural mean: spatial propagation per latent,
    /// feedback pins on the word-of-mouth latent, then cross-loadings.
    /// Returns `[latent][agent]`.
    pub fn evaluate_latents(
        &self,
        inputs: &YearInputs,
        states: &[AgentState],
        pins: &[Option<f64>],
        independent: bool,
    ) -> Result<Vec<Vec<f64>>> {
        let s = &self.params.structural;
        let means = self.structural_means(inputs, states);
        let mut z = Vec::with_capacity(s.n_latent());
        for (l, b) in means.iter().enumerate() {
            let delta = if independent { 0.0 } else { s.delta[l] };
            let p: &[Option<f64>] = if l == self.wom && !independent { pins } else { &[] };
            z.push(self.w.solve_spatial_pinned(delta, b, p)?);
        }
        for cl in &s.cross_loadings {
            let src = z[cl.source].clone();
            for (t, v) in z[cl.target].iter_mut().zip(src) {
                *t += cl.value * v;
            }
        }
        Ok(z)
    }

    /// Differenced systematic utility of the product.
    pub fn utility_difference(
        &self,
        latents: &[f64],
        network_share: f64,
        city_share: f64,
        ratio: f64,
    ) -> Result<f64> {
        let c = &self.params.choice;
        let mut x = DMatrix::zeros(c.n_attributes(), 2);
        for (idx, v) in [
            (self.attr_const, 1.0),
            (self.attr_network, network_share),
            (self.attr_city, city_share),
            (self.attr_price, ratio),
        ] {
            if let Some(m) = idx {
                x[(m, self.product)] = v;
            }
        }
        let v = choice_utility_systematic(c, latents, &x)?;
        Ok((v[self.product] - v[c.base_alternative]) / c.lambda_diff[(0, 0)].sqrt())
    }

    /// Adoption probability `Phi(dV)`.
    pub fn adoption_probability(
        &self,
        latents: &[f64],
        network_share: f64,
        city_share: f64,
        ratio: f64,
    ) -> Result<f64> {
        Ok(std_normal_cdf(self.utility_difference(latents, network_share, city_share, ratio)?))
    }

    fn cv_price(&self, cfg: &ScenarioConfig, i: usize) -> f64 {
        cfg.cv_price.unwrap_or(self.agents[i].cv_price)
    }

    /// One seed of a scenario.
    pub fn run_seed(&self, cfg: &ScenarioConfig, seed: u64) -> Result<SeedRun> {
        cfg.validate()?;
        let n = self.n_agents();
        let l_n = self.params.n_latent();
        let streams = RandomStreams::new(seed, n);
        let mut purchase = streams.purchase();
        let mut states = vec![
            AgentState {
                latents: vec![0.0; l_n],
                ..AgentState::default()
            };
            n
        ];
        let mut adopted_flags = vec![false; n];
        let mut network_share = vec![0.0; n];
        let mut city_share = 0.0;
        let mut records = Vec::with_capacity(cfg.horizon_years);
        for t in 1..=cfg.horizon_years {
            let inputs = YearInputs::for_year(cfg, t);
            assign_info_sources(
                &mut states,
                &streams.media_order,
                inputs.media_fraction,
                &network_share,
            );
            if !cfg.independent {
                post_purchase_update(&mut states, t, &streams.satisfaction, cfg.proportion_satisfied);
            }
            let pins = if cfg.independent {
                Vec::new()
            } else {
                let wom_prev: Vec<f64> = states.iter().map(|s| s.latents[self.wom]).collect();
                feedback_pins(&self.w, &states, &wom_prev)
            };
            let z = self.evaluate_latents(&inputs, &states, &pins, cfg.independent)?;
            let mut new_adopters = 0;
            let mut lat = vec![0.0; l_n];
            for i in 0..n {
                for l in 0..l_n {
                    lat[l] = z[l][i];
                }
                states[i].latents.copy_from_slice(&lat);
                let u: f64 = purchase.gen_range(0.5..1.0);
                if states[i].adopted {
                    continue;
                }
                let ratio = inputs.av_price / self.cv_price(cfg, i);
                let p = self.adoption_probability(&lat, network_share[i], city_share, ratio)?;
                if purchase_decision(p, u) {
                    states[i].adopted = true;
                    states[i].adoption_year = Some(t);
                    new_adopters += 1;
                }
            }
            for (f, s) in adopted_flags.iter_mut().zip(&states) {
                *f = s.adopted;
            }
            city_share = adopted_flags.iter().filter(|&&a| a).count() as f64 / n as f64;
            network_share = self.w.tie_share(&adopted_flags);
            records.push(YearRecord {
                year: t,
                city_share,
                network_share: network_share.clone(),
                new_adopters,
                av_price: inputs.av_price,
                crash_value: inputs.crash_value,
                legal_value: inputs.legal_value,
                media_fraction: inputs.media_fraction,
            });
        }
        Ok(SeedRun {
            seed,
            records,
            states,
        })
    }

    /// All seeds of a scenario with across-seed summaries.
    pub fn run_scenario(&self, cfg: &ScenarioConfig) -> Result<ScenarioResult> {
        cfg.validate()?;
        let runs = cfg
            .seeds
            .iter()
            .map(|&s| self.run_seed(cfg, s))
            .collect::<Result<Vec<_>>>()?;
        let years = cfg.horizon_years;
        let k = runs.len() as f64;
        let mean: Vec<f64> = (0..years)
            .map(|y| runs.iter().map(|r| r.records[y].city_share).sum::<f64>() / k)
            .collect();
        let sd = (0..years)
            .map(|y| {
                if runs.len() < 2 {
                    return 0.0;
                }
                let ss: f64 = runs
                    .iter()
                    .map(|r| (r.records[y].city_share - mean[y]).powi(2))
                    .sum();
                (ss / (k - 1.0)).sqrt()
            })
            .collect();
        Ok(ScenarioResult {
            config: cfg.clone(),
            runs,
            mean_city_share: mean,
            sd_city_share: sd,
        })
    }
}

/// Pre-drawn random numbers of one seed. Each purpose has its own ChaCha
/// stream so scenarios sharing a seed share every draw.
#[derive(Debug, Clone)]
pub struct RandomStreams {
    seed: u64,
    /// Order in which agents become reached by media.
    pub media_order: Vec<usize>,
    /// One uniform per agent deciding post-purchase satisfaction.
    pub satisfaction: Vec<f64>,
}

impl RandomStreams {
    pub fn new(seed: u64, n: usize) -> Self {
        let mut media = Self::stream(seed, 0);
        let mut media_order: Vec<usize> = (0..n).collect();
        media_order.shuffle(&mut media);
        let mut sat = Self::stream(seed, 1);
        let satisfaction = (0..n).map(|_| sat.gen::<f64>()).collect();
        Self {
            seed,
            media_order,
            satisfaction,
        }
    }

    fn stream(seed: u64, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        rng
    }

    /// Stream of purchase uniforms, consumed one per agent per year.
    pub fn purchase(&self) -> ChaCha8Rng {
        Self::stream(self.seed, 2)
    }
}

/// Purchase rule: adopt when the probability exceeds a `Uniform(0.5, 1)`
/// draw `u`.
pub fn purchase_decision(probability: f64, u: f64) -> bool {
    probability > u
}

/// Marks the first `round(fraction * N)` agents of `media_order` as reached
/// by media and flags friend information for agents whose tie adoption
/// share exceeds [`FRIEND_THRESHOLD`].
pub fn assign_info_sources(
    states: &mut [AgentState],
    media_order: &[usize],
    media_pct: f64,
    network_share: &[f64],
) {
    let target = media_target(media_pct, states.len());
    for &i in &media_order[..target] {
        states[i].media_reached = true;
    }
    for (s, &share) in states.iter_mut().zip(network_share) {
        if share > FRIEND_THRESHOLD {
            s.friend_reached = true;
        }
    }
}

/// Draws satisfaction for agents that adopted in the previous year.
pub fn post_purchase_update(
    states: &mut [AgentState],
    year: usize,
    satisfaction_uniforms: &[f64],
    proportion_satisfied: f64,
) {
    for (s, &u) in states.iter_mut().zip(satisfaction_uniforms) {
        if s.satisfied.is_none() && s.adoption_year.is_some_and(|y| y + 1 == year) {
            s.satisfied = Some(u < proportion_satisfied);
        }
    }
}

/// Word-of-mouth pins: satisfied adopters take the maximum and dissatisfied
/// adopters the minimum of their ties' values.
pub fn feedback_pins(w: &WeightMatrix, states: &[AgentState], wom: &[f64]) -> Vec<Option<f64>> {
    states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ties = w.row(i).iter().map(|&(j, _)| wom[j]);
            match s.satisfied {
                Some(true) => ties.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))),
                Some(false) => ties.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v)))),
                None => None,
            }
        })
        .collect()
}

/// Mean adopters per square mile by zip and year across a scenario's seeds.
/// Zips missing from `areas` are skipped.
pub fn density_by_zip(
    agents: &[Agent],
    result: &ScenarioResult,
    areas: &BTreeMap<String, f64>,
) -> Vec<(String, usize, f64)> {
    let k = result.runs.len() as f64;
    let mut out = Vec::new();
    for (zip, &area) in areas {
        let members: Vec<usize> = (0..agents.len()).filter(|&i| agents[i].zip == *zip).collect();
        for year in 1..=result.config.horizon_years {
            let total: usize = result
                .runs
                .iter()
                .map(|r| {
                    members
                        .iter()
                        .filter(|&&i| r.states[i].adoption_year.is_some_and(|y| y <= year))
                        .count()
                })
                .sum();
            out.push((zip.clone(), year, total as f64 / k / area));
        }
    }
    out
}
