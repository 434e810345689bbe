use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use iclv_core::cml::{estimate, EstimationResult};
use iclv_core::io::{
    fmt_f64, read_population, read_text, read_zip_areas, sample_profiles, scenario_grid,
    write_population, ParameterFile, SampleData,
};
use iclv_core::model::IclvParams;
use iclv_core::sim::{
    density_by_zip, synthetic_population, zip_areas, Agent, ScenarioConfig, ScenarioResult,
    SimBindings, Simulator, TIE_COVARIATES,
};
use iclv_core::social::{build_weight_matrix, IndividualProfile, WeightMatrix};

use crate::config::RunConfig;
use crate::output::OutputDir;

/// Default size of the synthetic population.
pub const DEFAULT_POPULATION: usize = 2000;

fn load_params(cfg: &RunConfig) -> Result<ParameterFile> {
    let path = cfg.require_path("params")?;
    ParameterFile::read(&path).with_context(|| format!("parameter file {}", path.display()))
}

fn load_sample(cfg: &RunConfig, params: &IclvParams) -> Result<SampleData> {
    let path = cfg.require_path("sample")?;
    SampleData::read(&path, params).with_context(|| format!("sample file {}", path.display()))
}

fn weights_for(cfg: &RunConfig, profiles: &[IndividualProfile]) -> Result<WeightMatrix> {
    Ok(build_weight_matrix(profiles, cfg.metric, cfg.ties, None)?)
}

fn output(cfg: &RunConfig, command: &str) -> Result<OutputDir> {
    OutputDir::create(&cfg.out, command, &cfg.hash(command)?, cfg.seed)
}

pub struct EstimateRun {
    pub result: EstimationResult,
    pub files: Vec<PathBuf>,
}

pub fn run_estimate(cfg: &RunConfig) -> Result<EstimateRun> {
    let pf = load_params(cfg)?;
    let data = load_sample(cfg, &pf.params)?;
    let w = weights_for(cfg, &sample_profiles(&data, &pf.params))?;
    let opts = cfg.estimate_options()?;
    let result = estimate(&data.sample, &w, &pf.params, &opts).context("estimation failed")?;
    let mut out = output(cfg, "estimate")?;

    let fitted = ParameterFile {
        params: result.params.clone(),
        labels: pf.labels.clone(),
        notes: pf.notes.clone(),
    };
    let se: BTreeMap<_, f64> = match &result.sandwich {
        Some(s) => result.keys.iter().copied().zip(s.std_errors.iter().copied()).collect(),
        None => BTreeMap::new(),
    };
    let rows = result.params.keys().into_iter().map(|k| {
        let [block, target, name] = fitted.row_of(k);
        let est = result.params.get(k);
        let free = result.params.is_free(k);
        let (s, t) = match se.get(&k) {
            Some(&s) if free => (fmt_f64(s), fmt_f64(est / s)),
            _ => (String::new(), String::new()),
        };
        vec![
            block,
            target,
            name,
            fitted.label(k),
            if free { "free" } else { "fixed" }.to_string(),
            fmt_f64(est),
            s,
            t,
        ]
    });
    out.write_csv(
        "estimates.csv",
        &["block", "target", "name", "label", "status", "estimate", "std_error", "t_stat"],
        rows,
    )?;

    let sw = result.sandwich.as_ref();
    let fit = [
        ("cml_loglik", fmt_f64(result.cml_loglik)),
        ("penalty", sw.map(|s| fmt_f64(s.penalty)).unwrap_or_default()),
        ("clic", sw.map(|s| fmt_f64(s.clic)).unwrap_or_default()),
        ("n_pairs", result.n_pairs.to_string()),
        ("loglik_per_pair", fmt_f64(result.loglik_per_pair())),
        ("choice_loglik", fmt_f64(result.choice_loglik)),
        ("choice_loglik_per_pair", fmt_f64(result.choice_loglik_per_pair())),
        ("n_free", result.keys.len().to_string()),
        ("floored_terms", result.floored.to_string()),
        ("iterations", result.iterations.to_string()),
        ("convergence", result.convergence.to_string()),
        ("gradient_norm", fmt_f64(result.gradient_norm)),
        ("singular_hessian", sw.map(|s| s.singular_hessian.to_string()).unwrap_or_default()),
        ("metric", format!("{:?}", cfg.metric).to_lowercase()),
        ("ties", cfg.ties.to_string()),
    ];
    out.write_csv(
        "fit.csv",
        &["statistic", "value"],
        fit.iter().map(|(k, v)| vec![k.to_string(), v.clone()]),
    )?;
    out.write("estimated_params.txt", &fitted.to_text()?)?;

    let report = format!(
        "individuals: {}\npairs: {}\nfree parameters: {}\nconvergence: {} after {} iterations (gradient norm {:.3e})\ncomposite log-likelihood: {:.4}\nCLIC: {}\n",
        data.sample.q(),
        result.n_pairs,
        result.keys.len(),
        result.convergence,
        result.iterations,
        result.gradient_norm,
        result.cml_loglik,
        sw.map(|s| format!("{:.4} (penalty {:.4})", s.clic, s.penalty)).unwrap_or_else(|| "n/a".into()),
    );
    out.write("report.txt", &report)?;
    Ok(EstimateRun {
        result,
        files: out.written().to_vec(),
    })
}

/// Agents of the configured population together with zip areas, if known.
pub fn load_population(cfg: &RunConfig) -> Result<(Vec<Agent>, Option<BTreeMap<String, f64>>)> {
    let synthetic = cfg.get("population").map_or(true, |p| p == "synthetic");
    let agents = if synthetic {
        let n = cfg.parse("population_size", DEFAULT_POPULATION)?;
        let seed = cfg.parse("population_seed", cfg.seed)?;
        if n < 2 {
            bail!("population_size must be at least 2");
        }
        synthetic_population(n, seed)
    } else {
        let path = cfg.require_path("population")?;
        read_population(&read_text(&path)?)
            .with_context(|| format!("population file {}", path.display()))?
    };
    let areas = match cfg.path("zip_areas") {
        Some(p) => Some(read_zip_areas(&read_text(&p)?)?),
        None if synthetic => Some(zip_areas()),
        None => None,
    };
    Ok((agents, areas))
}

pub fn tie_covariates(cfg: &RunConfig) -> Vec<String> {
    match cfg.get("tie_covariates") {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => TIE_COVARIATES.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn population_weights(cfg: &RunConfig, agents: &[Agent]) -> Result<WeightMatrix> {
    let names = tie_covariates(cfg);
    let profiles = agents
        .iter()
        .map(|a| a.profile(&names))
        .collect::<iclv_core::Result<Vec<_>>>()?;
    weights_for(cfg, &profiles)
}

/// Scenario grid of the configuration; with `--independent` every scenario
/// is followed by its independent-model counterpart.
pub fn scenarios(cfg: &RunConfig) -> Result<Vec<ScenarioConfig>> {
    let grid = scenario_grid(&cfg.scenario_values())?;
    if grid.is_empty() {
        bail!("scenario grid is empty");
    }
    if !cfg.independent {
        return Ok(grid);
    }
    let mut out = Vec::with_capacity(grid.len() * 2);
    for s in grid {
        if s.independent {
            out.push(s);
            continue;
        }
        let ind = ScenarioConfig {
            name: format!("{}/independent", s.name),
            independent: true,
            ..s.clone()
        };
        out.push(s);
        out.push(ind);
    }
    Ok(out)
}

pub struct SimulateRun {
    pub results: Vec<ScenarioResult>,
    pub files: Vec<PathBuf>,
}

pub fn run_simulate(cfg: &RunConfig) -> Result<SimulateRun> {
    let pf = load_params(cfg)?;
    let (agents, areas) = load_population(cfg)?;
    let grid = scenarios(cfg)?;
    let w = population_weights(cfg, &agents)?;
    let sim = Simulator::new(&pf.params, agents, w, &SimBindings::default())?;
    let results = grid
        .iter()
        .map(|s| sim.run_scenario(s))
        .collect::<iclv_core::Result<Vec<_>>>()?;
    let mut out = output(cfg, "simulate")?;

    let mut traj = Vec::new();
    let mut mean = Vec::new();
    let mut summary = Vec::new();
    let mut adopters = Vec::new();
    let mut density = Vec::new();
    for r in &results {
        let name = &r.config.name;
        for run in &r.runs {
            for y in &run.records {
                traj.push(vec![
                    name.clone(),
                    run.seed.to_string(),
                    y.year.to_string(),
                    fmt_f64(y.city_share),
                    y.new_adopters.to_string(),
                    fmt_f64(y.av_price),
                    fmt_f64(y.crash_value),
                    fmt_f64(y.legal_value),
                    fmt_f64(y.media_fraction),
                ]);
            }
            for (a, s) in sim.agents().iter().zip(&run.states) {
                adopters.push(vec![
                    name.clone(),
                    run.seed.to_string(),
                    a.id.clone(),
                    a.zip.clone(),
                    s.adoption_year.map(|y| y.to_string()).unwrap_or_default(),
                    s.satisfied.map(|b| b.to_string()).unwrap_or_default(),
                ]);
            }
        }
        for (t, (m, sd)) in r.mean_city_share.iter().zip(&r.sd_city_share).enumerate() {
            mean.push(vec![name.clone(), (t + 1).to_string(), fmt_f64(*m), fmt_f64(*sd)]);
        }
        let last = r.mean_city_share.len() - 1;
        summary.push(vec![
            name.clone(),
            r.config.independent.to_string(),
            fmt_f64(r.config.yearly_discount_rate),
            fmt_f64(r.config.proportion_satisfied),
            r.runs.len().to_string(),
            fmt_f64(r.mean_city_share[last]),
            fmt_f64(r.sd_city_share[last]),
            r.years_to(0.5).map(fmt_f64).unwrap_or_default(),
        ]);
        if let Some(areas) = &areas {
            for (zip, year, d) in density_by_zip(sim.agents(), r, areas) {
                density.push(vec![name.clone(), zip, year.to_string(), fmt_f64(d)]);
            }
        }
    }
    out.write_csv(
        "trajectory.csv",
        &[
            "scenario",
            "seed",
            "year",
            "city_share",
            "new_adopters",
            "av_price",
            "crash_value",
            "legal_value",
            "media_fraction",
        ],
        traj,
    )?;
    out.write_csv("mean_trajectory.csv", &["scenario", "year", "mean_city_share", "sd_city_share"], mean)?;
    out.write_csv(
        "summary.csv",
        &[
            "scenario",
            "independent",
            "yearly_discount_rate",
            "proportion_satisfied",
            "seeds",
            "final_mean_share",
            "final_sd_share",
            "years_to_50",
        ],
        summary,
    )?;
    out.write_csv(
        "adopters.csv",
        &["scenario", "seed", "agent", "zip", "adoption_year", "satisfied"],
        adopters,
    )?;
    if areas.is_some() {
        out.write_csv("density_by_zip.csv", &["scenario", "zip", "year", "adopters_per_sq_mile"], density)?;
    } else {
        println!("no zip_areas file configured; density_by_zip.csv not written");
    }
    Ok(SimulateRun {
        results,
        files: out.written().to_vec(),
    })
}

/// Builds the tie matrix of the sample (when configured) or the population.
pub fn run_weights(cfg: &RunConfig) -> Result<(WeightMatrix, Vec<PathBuf>)> {
    let w = if cfg.get("sample").is_some() {
        let pf = load_params(cfg)?;
        let data = load_sample(cfg, &pf.params)?;
        weights_for(cfg, &sample_profiles(&data, &pf.params))?
    } else {
        let (agents, _) = load_population(cfg)?;
        population_weights(cfg, &agents)?
    };
    let mut out = output(cfg, "weights")?;
    let mut buf = Vec::new();
    w.write_csv(&mut buf)?;
    out.write("weights.csv", &String::from_utf8(buf)?)?;
    if cfg.get("sample").is_none() && cfg.get("population").map_or(true, |p| p == "synthetic") {
        let (agents, _) = load_population(cfg)?;
        out.write("population.csv", &write_population(&agents)?)?;
    }
    Ok((w, out.written().to_vec()))
}

/// Every problem found in the configured inputs; empty when all are valid.
pub fn run_validate(cfg: &RunConfig) -> Vec<String> {
    let mut problems = Vec::new();
    let mut report = |what: &str, e: anyhow::Error| problems.push(format!("{what}: {e:#}"));
    let params = match cfg.get("params") {
        Some(_) => match load_params(cfg) {
            Ok(pf) => match pf.params.validate() {
                Ok(()) => Some(pf.params),
                Err(e) => {
                    report("params", e.into());
                    None
                }
            },
            Err(e) => {
                report("params", e);
                None
            }
        },
        None => None,
    };
    if cfg.get("sample").is_some() {
        match &params {
            Some(p) => {
                if let Err(e) = load_sample(cfg, p) {
                    report("sample", e);
                }
            }
            None => report("sample", anyhow::anyhow!("cannot check without a valid parameter file")),
        }
    }
    if ["population", "population_size", "zip_areas"].iter().any(|k| cfg.get(k).is_some()) {
        match load_population(cfg) {
            Ok((agents, _)) => {
                if let Some(p) = &params {
                    let checked = population_weights(cfg, &agents).and_then(|w| {
                        Simulator::new(p, agents, w, &SimBindings::default()).map_err(Into::into)
                    });
                    if let Err(e) = checked {
                        report("population", e);
                    }
                }
            }
            Err(e) => report("population", e),
        }
    }
    if let Err(e) = scenarios(cfg) {
        report("scenarios", e);
    }
    problems
}
