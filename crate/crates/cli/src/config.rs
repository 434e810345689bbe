//! Run configuration: a flat `key=value` file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use iclv_core::cml::{CmlOptions, EstimateOptions};
use iclv_core::io::{parse_key_values, read_text, KeyValues};
use iclv_core::mvn::CdfMethod;
use iclv_core::social::TieMetric;
use sha2::{Digest, Sha256};

/// Keys accepted in a run configuration.
pub const KNOWN_KEYS: &[&str] = &[
    "params",
    "sample",
    "population",
    "population_size",
    "population_seed",
    "zip_areas",
    "tie_covariates",
    "metric",
    "ties",
    "draws",
    "final_draws",
    "cdf",
    "max_iter",
    "grad_tol",
    "seed",
    "out",
    "name",
    "starting_price",
    "yearly_discount_rate",
    "proportion_satisfied",
    "curvature_crash",
    "curvature_legal",
    "crash_upper",
    "legal_upper",
    "horizon_years",
    "seeds",
    "cv_price",
    "independent",
];

/// Keys naming input files, resolved relative to the config file.
const PATH_KEYS: &[&str] = &["params", "sample", "population", "zip_areas"];

/// Values supplied on the command line; they take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub draws: Option<usize>,
    pub metric: Option<String>,
    pub ties: Option<usize>,
    pub independent: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Effective settings after overrides, with input paths made absolute.
    pub values: KeyValues,
    pub base_dir: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub metric: TieMetric,
    pub ties: usize,
    /// Compare every scenario with its independent-model counterpart.
    pub independent: bool,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let (mut values, base_dir) = match path {
            Some(p) => {
                let text = read_text(p)?;
                let kv = parse_key_values(&text)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (kv, dir)
            }
            None => (KeyValues::new(), PathBuf::from(".")),
        };
        for k in values.keys() {
            if !KNOWN_KEYS.contains(&k.as_str()) {
                bail!("unknown config key '{k}'");
            }
        }
        if let Some(s) = overrides.seed {
            values.insert("seed".into(), s.to_string());
        }
        if let Some(d) = overrides.draws {
            values.insert("draws".into(), d.to_string());
        }
        if let Some(m) = &overrides.metric {
            values.insert("metric".into(), m.clone());
        }
        if let Some(k) = overrides.ties {
            values.insert("ties".into(), k.to_string());
        }
        if overrides.independent {
            values.insert("compare_independent".into(), "true".into());
        }
        let seed = parse_or(&values, "seed", 42u64)?;
        let metric: TieMetric = values
            .get("metric")
            .map(String::as_str)
            .unwrap_or("gower")
            .parse()?;
        let ties = parse_or(&values, "ties", 5usize)?;
        if ties == 0 {
            bail!("ties must be at least 1");
        }
        let out = match &overrides.out {
            Some(o) => o.clone(),
            None => values
                .get("out")
                .map(|o| base_dir.join(o))
                .unwrap_or_else(|| PathBuf::from("out")),
        };
        Ok(Self {
            values,
            base_dir,
            seed,
            out,
            metric,
            ties,
            independent: overrides.independent,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Input file for `key`, relative to the config file.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|p| self.base_dir.join(p))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        let p = self
            .path(key)
            .with_context(|| format!("config needs '{key}=<path>'"))?;
        if !p.exists() {
            bail!("{key} file {} does not exist", p.display());
        }
        Ok(p)
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        parse_or(&self.values, key, default)
    }

    /// Scenario keys plus seeds derived from the global seed when the config
    /// lists none.
    pub fn scenario_values(&self) -> KeyValues {
        let mut kv = self.values.clone();
        if !kv.contains_key("seeds") {
            kv.insert("seeds".into(), format!("{}..{}", self.seed, self.seed + 9));
        }
        kv.retain(|k, _| {
            matches!(
                k.as_str(),
                "name"
                    | "starting_price"
                    | "yearly_discount_rate"
                    | "proportion_satisfied"
                    | "curvature_crash"
                    | "curvature_legal"
                    | "crash_upper"
                    | "legal_upper"
                    | "horizon_years"
                    | "seeds"
                    | "cv_price"
                    | "independent"
            )
        });
        kv
    }

    pub fn estimate_options(&self) -> Result<EstimateOptions> {
        let d = EstimateOptions::default();
        let method: CdfMethod = self.get("cdf").unwrap_or("auto").parse()?;
        let draws = self.parse("draws", d.cml.draws)?;
        Ok(EstimateOptions {
            cml: CmlOptions { method, draws },
            final_draws: self.parse("final_draws", d.final_draws.max(draws))?,
            max_iter: self.parse("max_iter", d.max_iter)?,
            grad_tol: self.parse("grad_tol", d.grad_tol)?,
            ..d
        })
    }

    /// SHA-256 over the effective settings and the contents of every input
    /// file they reference.
    pub fn hash(&self, command: &str) -> Result<String> {
        let mut h = Sha256::new();
        h.update(format!("command={command}\n"));
        for (k, v) in &self.values {
            if k == "out" {
                continue;
            }
            if PATH_KEYS.contains(&k.as_str()) && v != "synthetic" {
                let p = self.base_dir.join(v);
                let bytes = std::fs::read(&p)
                    .with_context(|| format!("reading {k} file {}", p.display()))?;
                h.update(format!("{k}=sha256:{}\n", hex(&Sha256::digest(&bytes))));
            } else {
                h.update(format!("{k}={v}\n"));
            }
        }
        Ok(hex(&h.finalize()))
    }
}

fn parse_or<T: std::str::FromStr>(kv: &KeyValues, key: &str, default: T) -> Result<T> {
    match kv.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| anyhow::anyhow!("bad value '{v}' for '{key}'")),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
