//! Sample CSV: one row per individual.
//!
//! Columns: `id`, optional `lat` and `lon`, every structural and
//! measurement covariate by name, every indicator by name (ordinal response
//! `1..=J`), and per task `t` (1-based) the attribute columns
//! `t<t>:<attribute>:<alternative>` plus the chosen alternative `t<t>:choice`.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;

use super::{fmt_f64, parse_f64};
use crate::error::{Error, Result};
use crate::model::{ChoiceTask, IclvParams, Individual, Sample};
use crate::social::{AttributeValue, GeoPoint, IndividualProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct SampleData {
    pub sample: Sample,
    /// Coordinates of every individual when the file carries them.
    pub locations: Option<Vec<GeoPoint>>,
}

/// Distinct covariate names in structural-then-measurement order.
fn covariate_names(params: &IclvParams) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for n in params
        .structural
        .covariates
        .iter()
        .chain(&params.measurement.covariates)
        .flatten()
    {
        if !names.contains(n) {
            names.push(n.clone());
        }
    }
    names
}

fn task_column(t: usize, attr: &str, alt: &str) -> String {
    format!("t{}:{attr}:{alt}", t + 1)
}

fn choice_column(t: usize) -> String {
    format!("t{}:choice", t + 1)
}

pub fn read_sample(text: &str, params: &IclvParams) -> Result<SampleData> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col: BTreeMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let missing = |name: &str| Error::Parse {
        row: 0,
        column: name.to_string(),
        message: "missing column".into(),
    };
    let find = |name: &str| col.get(name).copied().ok_or_else(|| missing(name));
    let id_col = find("id")?;
    let has_loc = col.contains_key("lat") || col.contains_key("lon");
    let loc_cols = if has_loc { Some((find("lat")?, find("lon")?)) } else { None };
    let covs = covariate_names(params);
    let cov_cols: BTreeMap<&str, usize> = covs
        .iter()
        .map(|n| Ok((n.as_str(), find(n)?)))
        .collect::<Result<_>>()?;
    let m = &params.measurement;
    let ind_cols: Vec<usize> = m.indicators.iter().map(|n| find(n)).collect::<Result<_>>()?;
    let n_tasks = (0..).take_while(|&t| col.contains_key(choice_column(t).as_str())).count();
    let c = &params.choice;
    let mut task_cols = Vec::with_capacity(n_tasks);
    for t in 0..n_tasks {
        let mut cells = DMatrix::zeros(c.n_attributes(), c.n_alternatives());
        for (a, attr) in c.attributes.iter().enumerate() {
            for (i, alt) in c.alternatives.iter().enumerate() {
                cells[(a, i)] = find(&task_column(t, attr, alt))?;
            }
        }
        task_cols.push((cells, find(&choice_column(t))?));
    }

    let mut individuals = Vec::new();
    let mut locations = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let num = |name: &str, i: usize| parse_f64(cell(i), row, name);
        let id = cell(id_col).to_string();
        if id.is_empty() {
            return Err(Error::Parse { row, column: "id".into(), message: "empty id".into() });
        }
        if let Some((la, lo)) = loc_cols {
            let p = GeoPoint::new(num("lat", la)?, num("lon", lo)?).map_err(|e| Error::Parse {
                row,
                column: "lat".into(),
                message: e.to_string(),
            })?;
            locations.push(p);
        }
        let value = |name: &String| num(name, cov_cols[name.as_str()]);
        let structural = params
            .structural
            .covariates
            .iter()
            .map(|v| v.iter().map(value).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let measurement = m
            .covariates
            .iter()
            .map(|v| v.iter().map(value).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut responses = Vec::with_capacity(ind_cols.len());
        for (k, &ci) in ind_cols.iter().enumerate() {
            let y = cell(ci).parse::<i64>().ok().filter(|y| (1..=m.categories as i64).contains(y));
            match y {
                Some(y) => responses.push(y as u8),
                None => {
                    return Err(Error::Parse {
                        row,
                        column: m.indicators[k].clone(),
                        message: format!(
                            "ordinal response '{}' outside 1..={}",
                            cell(ci),
                            m.categories
                        ),
                    })
                }
            }
        }
        let mut tasks = Vec::with_capacity(n_tasks);
        for (t, (cells, chosen_col)) in task_cols.iter().enumerate() {
            let mut x = DMatrix::zeros(c.n_attributes(), c.n_alternatives());
            for a in 0..c.n_attributes() {
                for i in 0..c.n_alternatives() {
                    let name = task_column(t, &c.attributes[a], &c.alternatives[i]);
                    x[(a, i)] = num(&name, cells[(a, i)])?;
                }
            }
            let chosen = c
                .alternatives
                .iter()
                .position(|a| a == cell(*chosen_col))
                .ok_or_else(|| Error::Parse {
                    row,
                    column: choice_column(t),
                    message: format!("unknown alternative '{}'", cell(*chosen_col)),
                })?;
            tasks.push(ChoiceTask { attributes: x, chosen });
        }
        individuals.push(Individual {
            id,
            structural,
            measurement,
            responses,
            tasks,
        });
    }
    let sample = Sample { individuals };
    sample.validate(params)?;
    Ok(SampleData {
        sample,
        locations: loc_cols.map(|_| locations),
    })
}

pub fn write_sample(data: &SampleData, params: &IclvParams) -> Result<String> {
    let sample = &data.sample;
    sample.validate(params)?;
    let covs = covariate_names(params);
    let c = &params.choice;
    let t_n = sample.n_tasks();
    let mut header = vec!["id".to_string()];
    if data.locations.is_some() {
        header.push("lat".into());
        header.push("lon".into());
    }
    header.extend(covs.iter().cloned());
    header.extend(params.measurement.indicators.iter().cloned());
    for t in 0..t_n {
        for attr in &c.attributes {
            for alt in &c.alternatives {
                header.push(task_column(t, attr, alt));
            }
        }
        header.push(choice_column(t));
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(&header)?;
    for (q, ind) in sample.individuals.iter().enumerate() {
        let mut rec = vec![ind.id.clone()];
        if let Some(loc) = &data.locations {
            rec.push(fmt_f64(loc[q].lat));
            rec.push(fmt_f64(loc[q].lon));
        }
        let mut values: BTreeMap<&str, f64> = BTreeMap::new();
        for (names, vals) in params
            .structural
            .covariates
            .iter()
            .zip(&ind.structural)
            .chain(params.measurement.covariates.iter().zip(&ind.measurement))
        {
            for (n, v) in names.iter().zip(vals) {
                values.insert(n.as_str(), *v);
            }
        }
        rec.extend(covs.iter().map(|n| fmt_f64(values[n.as_str()])));
        rec.extend(ind.responses.iter().map(|y| y.to_string()));
        for task in &ind.tasks {
            for a in 0..c.n_attributes() {
                for i in 0..c.n_alternatives() {
                    rec.push(fmt_f64(task.attributes[(a, i)]));
                }
            }
            rec.push(c.alternatives[task.chosen].clone());
        }
        wtr.write_record(&rec)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Schema(e.to_string()))
}

/// Tie-building profiles: every distinct structural covariate as a
/// continuous attribute, plus coordinates when available.
pub fn sample_profiles(data: &SampleData, params: &IclvParams) -> Vec<IndividualProfile> {
    let s = &params.structural;
    let mut names: Vec<(usize, usize)> = Vec::new();
    let mut seen: Vec<&String> = Vec::new();
    for (l, cov) in s.covariates.iter().enumerate() {
        for (k, n) in cov.iter().enumerate() {
            if !seen.contains(&n) {
                seen.push(n);
                names.push((l, k));
            }
        }
    }
    data.sample
        .individuals
        .iter()
        .enumerate()
        .map(|(q, ind)| IndividualProfile {
            id: ind.id.clone(),
            zip_centroid: data.locations.as_ref().map(|l| l[q]),
            attributes: names
                .iter()
                .map(|&(l, k)| {
                    (s.covariates[l][k].clone(), AttributeValue::Continuous(ind.structural[l][k]))
                })
                .collect(),
        })
        .collect()
}

impl SampleData {
    pub fn read(path: &Path, params: &IclvParams) -> Result<Self> {
        read_sample(&super::read_text(path)?, params)
    }
}
