//! Flat `key=value` configuration and scenario grids.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::sim::ScenarioConfig;

/// Ordered `key=value` pairs. Blank lines and `#` comments are ignored.
pub type KeyValues = BTreeMap<String, String>;

pub fn parse_key_values(text: &str) -> Result<KeyValues> {
    let mut kv = KeyValues::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            row: i + 1,
            column: "line".into(),
            message: format!("expected key=value, got '{line}'"),
        })?;
        let k = k.trim().to_string();
        if kv.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse {
                row: i + 1,
                column: k,
                message: "duplicate key".into(),
            });
        }
    }
    Ok(kv)
}

fn values<T: std::str::FromStr>(kv: &KeyValues, key: &str, default: T) -> Result<Vec<T>> {
    match kv.get(key) {
        None => Ok(vec![default]),
        Some(s) => {
            let v = s
                .split(',')
                .map(|x| x.trim())
                .filter(|x| !x.is_empty())
                .map(|x| {
                    x.parse::<T>()
                        .map_err(|_| Error::Config(format!("bad value '{x}' for '{key}'")))
                })
                .collect::<Result<Vec<T>>>()?;
            if v.is_empty() {
                return Err(Error::Config(format!("'{key}' lists no values")));
            }
            Ok(v)
        }
    }
}

/// Seeds as a comma list, or `a..b` for an inclusive range.
fn seeds(kv: &KeyValues, default: Vec<u64>) -> Result<Vec<u64>> {
    let Some(s) = kv.get("seeds") else {
        return Ok(default);
    };
    let bad = || Error::Config(format!("bad seeds '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let v = values::<u64>(kv, "seeds", 0)?;
    Ok(v)
}

/// Expands comma-separated values of the scenario keys into their
/// Cartesian product. Keys: `name`, `starting_price`,
/// `yearly_discount_rate`, `proportion_satisfied`, `curvature_crash`,
/// `curvature_legal`, `independent` (grid keys); `crash_upper`,
/// `legal_upper`, `horizon_years`, `seeds`, `cv_price` (single values).
pub fn scenario_grid(kv: &KeyValues) -> Result<Vec<ScenarioConfig>> {
    let d = ScenarioConfig::default();
    let name = kv.get("name").cloned().unwrap_or_else(|| d.name.clone());
    let price = values(kv, "starting_price", d.starting_price)?;
    let rate = values(kv, "yearly_discount_rate", d.yearly_discount_rate)?;
    let sat = values(kv, "proportion_satisfied", d.proportion_satisfied)?;
    let cc = values(kv, "curvature_crash", d.curvature_crash)?;
    let cl = values(kv, "curvature_legal", d.curvature_legal)?;
    let ind = values(kv, "independent", d.independent)?;
    let single = |key: &str, dv: f64| -> Result<f64> {
        let v = values(kv, key, dv)?;
        if v.len() != 1 {
            return Err(Error::Config(format!("'{key}' takes a single value")));
        }
        Ok(v[0])
    };
    let crash_upper = single("crash_upper", d.crash_upper)?;
    let legal_upper = single("legal_upper", d.legal_upper)?;
    let horizon = values(kv, "horizon_years", d.horizon_years)?;
    if horizon.len() != 1 {
        return Err(Error::Config("'horizon_years' takes a single value".into()));
    }
    let cv_price = match kv.get("cv_price") {
        None => None,
        Some(_) => Some(single("cv_price", 0.0)?),
    };
    let seeds = seeds(kv, d.seeds.clone())?;
    let mut out = Vec::new();
    for &p in &price {
        for &r in &rate {
            for &s in &sat {
                for &c1 in &cc {
                    for &c2 in &cl {
                        for &i in &ind {
                            let mut tag = Vec::new();
                            if price.len() > 1 {
                                tag.push(format!("price={p}"));
                            }
                            if rate.len() > 1 {
                                tag.push(format!("rate={r}"));
                            }
                            if sat.len() > 1 {
                                tag.push(format!("satisfied={s}"));
                            }
                            if cc.len() > 1 {
                                tag.push(format!("crash={c1}"));
                            }
                            if cl.len() > 1 {
                                tag.push(format!("legal={c2}"));
                            }
                            if ind.len() > 1 {
                                tag.push(if i { "independent" } else { "interdependent" }.into());
                            }
                            let name = if tag.is_empty() {
                                name.clone()
                            } else {
                                format!("{name}/{}", tag.join("/"))
                            };
                            let cfg = ScenarioConfig {
                                name,
                                starting_price: p,
                                yearly_discount_rate: r,
                                proportion_satisfied: s,
                                curvature_crash: c1,
                                curvature_legal: c2,
                                crash_upper,
                                legal_upper,
                                horizon_years: horizon[0],
                                seeds: seeds.clone(),
                                cv_price,
                                independent: i,
                            };
                            cfg.validate()?;
                            out.push(cfg);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
