//! Parameter table: `key=value` structure lines followed by a CSV table with
//! columns `block,target,name,value,status,label`.
//!
//! ```text
//! # comment lines are kept as notes
//! latents=wom,risk
//! indicators=safer,uncomfortable
//! categories=5
//! alternatives=cv,av
//! base_alternative=cv
//! attributes=const,price_ratio
//! block,target,name,value,status,label
//! alpha,wom,workers,0.273,free,Number of workers
//! ```
//!
//! Rows by block (`target`, `name`):
//! `alpha` (latent, covariate), `delta` (latent, -), `gamma` (latent, latent),
//! `rho` (target latent, source latent), `intercept` (indicator, -),
//! `meas_coef` (indicator, covariate), `loading` (indicator, latent),
//! `threshold` (indicator, category index starting at 3), `b` (attribute, -),
//! `lambda` (alternative, latent), `interaction` (latent, attribute),
//! `lambda_diff` (row, column, 1-based). Loadings, latent utility loadings,
//! spatial parameters and correlations that are not listed are fixed at zero.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use super::{fmt_f64, parse_f64};
use crate::error::{Error, Result};
use crate::model::{
    ChoiceParams, CrossLoading, IclvParams, Interaction, MeasurementParams, ParamKey,
    StructuralParams,
};

const TABLE_HEADER: [&str; 6] = ["block", "target", "name", "value", "status", "label"];

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterFile {
    pub params: IclvParams,
    /// Display labels by parameter.
    pub labels: BTreeMap<ParamKey, String>,
    /// Comment lines of the header (without the leading `#`).
    pub notes: Vec<String>,
}

fn list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|x| x.trim().to_string())
        .filter(|x| !x.is_empty())
        .collect()
}

struct Row {
    line: usize,
    block: String,
    target: String,
    name: String,
    value: f64,
    free: bool,
    label: String,
}

impl ParameterFile {
    pub fn new(params: IclvParams) -> Self {
        Self {
            params,
            labels: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let mut notes = Vec::new();
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        let mut start = None;
        for (i, raw) in lines.iter().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                notes.push(c.strip_prefix(' ').unwrap_or(c).to_string());
                continue;
            }
            if line.starts_with("block,") {
                start = Some(i);
                break;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                row: i + 1,
                column: "header".into(),
                message: format!("expected key=value, got '{line}'"),
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let start = start.ok_or_else(|| Error::Schema("parameter table header not found".into()))?;
        let need = |k: &str| -> Result<&String> {
            kv.get(k)
                .ok_or_else(|| Error::Schema(format!("parameter file lacks '{k}='")))
        };
        let latents = list(need("latents")?);
        let indicators = list(need("indicators")?);
        let categories: usize = need("categories")?
            .parse()
            .map_err(|_| Error::Schema("categories must be an integer".into()))?;
        if categories < 2 {
            return Err(Error::Schema("categories must be at least 2".into()));
        }
        let alternatives = list(need("alternatives")?);
        let base = need("base_alternative")?;
        let base_alternative = alternatives
            .iter()
            .position(|a| a == base)
            .ok_or_else(|| Error::Schema(format!("unknown base alternative '{base}'")))?;
        let attributes = list(need("attributes")?);

        let body = lines[start..].join("\n");
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(body.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 5 || header[..5] != TABLE_HEADER[..5] {
            return Err(Error::Parse {
                row: start + 1,
                column: "header".into(),
                message: format!("expected columns {}", TABLE_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = start + rec.position().map_or(0, |p| p.line() as usize);
            let get = |i: usize| rec.get(i).unwrap_or("").to_string();
            let value = parse_f64(&get(3), line, "value")?;
            let free = match get(4).as_str() {
                "free" => true,
                "fixed" => false,
                other => {
                    return Err(Error::Parse {
                        row: line,
                        column: "status".into(),
                        message: format!("status must be 'free' or 'fixed', got '{other}'"),
                    })
                }
            };
            rows.push(Row {
                line,
                block: get(0),
                target: get(1),
                name: get(2),
                value,
                free,
                label: get(5),
            });
        }

        let l = latents.len();
        let h = indicators.len();
        let ni = alternatives.len();
        let lat = |s: &str, row: usize, col: &str| -> Result<usize> {
            latents.iter().position(|x| x == s).ok_or_else(|| Error::Parse {
                row,
                column: col.into(),
                message: format!("unknown latent '{s}'"),
            })
        };
        let ind = |s: &str, row: usize| -> Result<usize> {
            indicators.iter().position(|x| x == s).ok_or_else(|| Error::Parse {
                row,
                column: "target".into(),
                message: format!("unknown indicator '{s}'"),
            })
        };
        let attr = |s: &str, row: usize, col: &str| -> Result<usize> {
            attributes.iter().position(|x| x == s).ok_or_else(|| Error::Parse {
                row,
                column: col.into(),
                message: format!("unknown attribute '{s}'"),
            })
        };
        let index = |s: &str, row: usize, col: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| Error::Parse {
                row,
                column: col.into(),
                message: format!("'{s}' is not an index"),
            })
        };

        // Lists whose structure comes from the rows themselves.
        let mut s_cov: Vec<Vec<String>> = vec![Vec::new(); l];
        let mut m_cov: Vec<Vec<String>> = vec![Vec::new(); h];
        let mut cross = Vec::new();
        let mut inter = Vec::new();
        for r in &rows {
            match r.block.as_str() {
                "alpha" => s_cov[lat(&r.target, r.line, "target")?].push(r.name.clone()),
                "meas_coef" => m_cov[ind(&r.target, r.line)?].push(r.name.clone()),
                "rho" => cross.push(CrossLoading {
                    target: lat(&r.target, r.line, "target")?,
                    source: lat(&r.name, r.line, "name")?,
                    value: 0.0,
                }),
                "interaction" => inter.push(Interaction {
                    latent: lat(&r.target, r.line, "target")?,
                    attribute: attr(&r.name, r.line, "name")?,
                    value: 0.0,
                }),
                _ => {}
            }
        }
        let mut params = IclvParams {
            structural: StructuralParams {
                latents: latents.clone(),
                alpha: s_cov.iter().map(|c| vec![0.0; c.len()]).collect(),
                covariates: s_cov.clone(),
                delta: vec![0.0; l],
                gamma: DMatrix::identity(l, l),
                cross_loadings: cross,
            },
            measurement: MeasurementParams {
                indicators: indicators.clone(),
                categories,
                intercept: vec![f64::NAN; h],
                coef: m_cov.iter().map(|c| vec![0.0; c.len()]).collect(),
                covariates: m_cov.clone(),
                loadings: DMatrix::zeros(h, l),
                thresholds: vec![vec![f64::NAN; categories - 2]; h],
            },
            choice: ChoiceParams {
                alternatives: alternatives.clone(),
                base_alternative,
                attributes: attributes.clone(),
                b: vec![f64::NAN; attributes.len()],
                lambda: DMatrix::zeros(l, ni),
                interactions: inter,
                lambda_diff: DMatrix::identity(ni - 1, ni - 1),
            },
            fixed: BTreeSet::new(),
        };
        for k in params.keys() {
            params.fixed.insert(k);
        }
        let mut seen = BTreeSet::new();
        let mut labels = BTreeMap::new();
        let (mut alpha_i, mut meas_i) = (vec![0usize; l], vec![0usize; h]);
        let (mut rho_i, mut inter_i) = (0usize, 0usize);
        for r in &rows {
            let key = match r.block.as_str() {
                "alpha" => {
                    let latent = lat(&r.target, r.line, "target")?;
                    alpha_i[latent] += 1;
                    ParamKey::Alpha { latent, covariate: alpha_i[latent] - 1 }
                }
                "delta" => ParamKey::Delta { latent: lat(&r.target, r.line, "target")? },
                "gamma" => {
                    let a = lat(&r.target, r.line, "target")?;
                    let b = lat(&r.name, r.line, "name")?;
                    if a == b {
                        return Err(Error::Parse {
                            row: r.line,
                            column: "name".into(),
                            message: "correlation needs two different latents".into(),
                        });
                    }
                    ParamKey::GammaCorr { row: a.max(b), col: a.min(b) }
                }
                "rho" => {
                    rho_i += 1;
                    ParamKey::Rho { index: rho_i - 1 }
                }
                "intercept" => ParamKey::Intercept { indicator: ind(&r.target, r.line)? },
                "meas_coef" => {
                    let indicator = ind(&r.target, r.line)?;
                    meas_i[indicator] += 1;
                    ParamKey::MeasCoef { indicator, covariate: meas_i[indicator] - 1 }
                }
                "loading" => ParamKey::Loading {
                    indicator: ind(&r.target, r.line)?,
                    latent: lat(&r.name, r.line, "name")?,
                },
                "threshold" => {
                    let j = index(&r.name, r.line, "name")?;
                    if j < 3 || j > categories {
                        return Err(Error::Parse {
                            row: r.line,
                            column: "name".into(),
                            message: format!("threshold index must lie in 3..={categories}"),
                        });
                    }
                    ParamKey::Threshold { indicator: ind(&r.target, r.line)?, index: j - 3 }
                }
                "b" => ParamKey::B { attribute: attr(&r.target, r.line, "target")? },
                "lambda" => {
                    let alternative =
                        alternatives.iter().position(|a| *a == r.target).ok_or_else(|| {
                            Error::Parse {
                                row: r.line,
                                column: "target".into(),
                                message: format!("unknown alternative '{}'", r.target),
                            }
                        })?;
                    if alternative == base_alternative {
                        return Err(Error::Parse {
                            row: r.line,
                            column: "target".into(),
                            message: "the base alternative has no latent loadings".into(),
                        });
                    }
                    ParamKey::Lambda { latent: lat(&r.name, r.line, "name")?, alternative }
                }
                "interaction" => {
                    inter_i += 1;
                    ParamKey::Interaction { index: inter_i - 1 }
                }
                "lambda_diff" => {
                    let a = index(&r.target, r.line, "target")?;
                    let b = index(&r.name, r.line, "name")?;
                    let (row, col) = (a.max(b), a.min(b));
                    if col == 0 || row >= ni || (row == 1 && col == 1) {
                        return Err(Error::Parse {
                            row: r.line,
                            column: "target".into(),
                            message: "lambda_diff cell out of range (cell 1,1 is fixed at 1)".into(),
                        });
                    }
                    ParamKey::LambdaDiff { row: row - 1, col: col - 1 }
                }
                other => {
                    return Err(Error::Parse {
                        row: r.line,
                        column: "block".into(),
                        message: format!("unknown block '{other}'"),
                    })
                }
            };
            if !seen.insert(key) {
                return Err(Error::Parse {
                    row: r.line,
                    column: "block".into(),
                    message: format!("duplicate entry for {}", params.name(key)),
                });
            }
            params.set(key, r.value);
            params.set_free(key, r.free);
            if !r.label.is_empty() {
                labels.insert(key, r.label.clone());
            }
        }
        for k in params.keys() {
            if params.get(k).is_nan() {
                return Err(Error::Schema(format!("parameter file lacks {}", params.name(k))));
            }
        }
        params.validate()?;
        Ok(Self {
            params,
            labels,
            notes,
        })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::parse(&super::read_text(path)?)
    }

    /// `[block, target, name]` columns identifying a parameter.
    pub fn row_of(&self, key: ParamKey) -> [String; 3] {
        let p = &self.params;
        let s = &p.structural;
        let m = &p.measurement;
        let c = &p.choice;
        let (block, target, name) = match key {
            ParamKey::Alpha { latent, covariate } => {
                ("alpha", s.latents[latent].clone(), s.covariates[latent][covariate].clone())
            }
            ParamKey::Delta { latent } => ("delta", s.latents[latent].clone(), String::new()),
            ParamKey::GammaCorr { row, col } => {
                ("gamma", s.latents[row].clone(), s.latents[col].clone())
            }
            ParamKey::Rho { index } => {
                let cl = &s.cross_loadings[index];
                ("rho", s.latents[cl.target].clone(), s.latents[cl.source].clone())
            }
            ParamKey::Intercept { indicator } => {
                ("intercept", m.indicators[indicator].clone(), String::new())
            }
            ParamKey::MeasCoef { indicator, covariate } => (
                "meas_coef",
                m.indicators[indicator].clone(),
                m.covariates[indicator][covariate].clone(),
            ),
            ParamKey::Loading { indicator, latent } => {
                ("loading", m.indicators[indicator].clone(), s.latents[latent].clone())
            }
            ParamKey::Threshold { indicator, index } => {
                ("threshold", m.indicators[indicator].clone(), (index + 3).to_string())
            }
            ParamKey::B { attribute } => ("b", c.attributes[attribute].clone(), String::new()),
            ParamKey::Lambda { latent, alternative } => {
                ("lambda", c.alternatives[alternative].clone(), s.latents[latent].clone())
            }
            ParamKey::Interaction { index } => {
                let it = &c.interactions[index];
                ("interaction", s.latents[it.latent].clone(), c.attributes[it.attribute].clone())
            }
            ParamKey::LambdaDiff { row, col } => {
                ("lambda_diff", (row + 1).to_string(), (col + 1).to_string())
            }
        };
        [block.to_string(), target, name]
    }

    pub fn to_text(&self) -> Result<String> {
        let p = &self.params;
        let mut out = String::new();
        for n in &self.notes {
            if n.is_empty() {
                out.push_str("#\n");
            } else {
                out.push_str(&format!("# {n}\n"));
            }
        }
        out.push_str(&format!("latents={}\n", p.structural.latents.join(",")));
        out.push_str(&format!("indicators={}\n", p.measurement.indicators.join(",")));
        out.push_str(&format!("categories={}\n", p.measurement.categories));
        out.push_str(&format!("alternatives={}\n", p.choice.alternatives.join(",")));
        out.push_str(&format!(
            "base_alternative={}\n",
            p.choice.alternatives[p.choice.base_alternative]
        ));
        out.push_str(&format!("attributes={}\n", p.choice.attributes.join(",")));
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(TABLE_HEADER)?;
        for key in p.keys() {
            let [block, target, name] = self.row_of(key);
            let status = if p.is_free(key) { "free" } else { "fixed" };
            let label = self.labels.get(&key).cloned().unwrap_or_default();
            wtr.write_record([block, target, name, fmt_f64(p.get(key)), status.into(), label])?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Schema(e.to_string()))?);
        Ok(out)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    /// Label of a parameter, falling back to its generated name.
    pub fn label(&self, key: ParamKey) -> String {
        self.labels
            .get(&key)
            .cloned()
            .unwrap_or_else(|| self.params.name(key))
    }
}
