//! Population CSV (`id,zip,lat,lon,cv_price,<covariates...>`) and zip area
//! CSV (`zip,square_miles`).

use std::collections::BTreeMap;

use super::{fmt_f64, parse_f64};
use crate::error::{Error, Result};
use crate::sim::Agent;
use crate::social::GeoPoint;

const FIXED: [&str; 5] = ["id", "zip", "lat", "lon", "cv_price"];

pub fn read_population(text: &str) -> Result<Vec<Agent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    for (i, want) in FIXED.iter().enumerate() {
        if header.get(i).map(String::as_str) != Some(*want) {
            return Err(Error::Parse {
                row: 0,
                column: want.to_string(),
                message: format!("population columns must start with {}", FIXED.join(",")),
            });
        }
    }
    let mut agents = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let lat = parse_f64(get(2), row, "lat")?;
        let lon = parse_f64(get(3), row, "lon")?;
        let location = GeoPoint::new(lat, lon).map_err(|e| Error::Parse {
            row,
            column: "lat".into(),
            message: e.to_string(),
        })?;
        let mut covariates = BTreeMap::new();
        for (i, name) in header.iter().enumerate().skip(FIXED.len()) {
            covariates.insert(name.clone(), parse_f64(get(i), row, name)?);
        }
        agents.push(Agent {
            id: get(0).to_string(),
            zip: get(1).to_string(),
            location: Some(location),
            cv_price: parse_f64(get(4), row, "cv_price")?,
            covariates,
        });
    }
    Ok(agents)
}

pub fn write_population(agents: &[Agent]) -> Result<String> {
    let names: Vec<String> = agents
        .first()
        .map(|a| a.covariates.keys().cloned().collect())
        .unwrap_or_default();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.extend(names.iter().cloned());
    wtr.write_record(&header)?;
    for a in agents {
        let loc = a
            .location
            .ok_or_else(|| Error::Schema(format!("agent '{}' has no location", a.id)))?;
        let mut rec = vec![
            a.id.clone(),
            a.zip.clone(),
            fmt_f64(loc.lat),
            fmt_f64(loc.lon),
            fmt_f64(a.cv_price),
        ];
        for n in &names {
            let v = a.covariates.get(n).ok_or_else(|| {
                Error::Schema(format!("agent '{}' lacks covariate '{n}'", a.id))
            })?;
            rec.push(fmt_f64(*v));
        }
        wtr.write_record(&rec)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Schema(e.to_string()))
}

pub fn read_zip_areas(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let area = parse_f64(rec.get(1).unwrap_or(""), r + 1, "square_miles")?;
        if !(area > 0.0) {
            return Err(Error::Parse {
                row: r + 1,
                column: "square_miles".into(),
                message: "area must be positive".into(),
            });
        }
        out.insert(rec.get(0).unwrap_or("").to_string(), area);
    }
    Ok(out)
}
