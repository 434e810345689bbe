//! Social tie matrices built from socio-demographic similarity (Gower) or
//! geographic proximity, truncated to the `k` strongest ties per individual.

mod gower;
mod matrix;

pub use gower::{gower_dissimilarity, GowerScale};
pub use matrix::WeightMatrix;

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Mean earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Floor applied to distances before inverting them.
pub const MIN_DISTANCE_KM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    Continuous(f64),
    Categorical(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(lat.abs() <= 90.0) || !(lon.abs() <= 180.0) {
            return Err(Error::Domain(format!("invalid coordinates ({lat}, {lon})")));
        }
        Ok(Self { lat, lon })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndividualProfile {
    pub id: String,
    pub zip_centroid: Option<GeoPoint>,
    pub attributes: Vec<(String, AttributeValue)>,
}

/// Great-circle distance in kilometres (haversine).
pub fn geodesic_distance(p1: GeoPoint, p2: GeoPoint) -> Result<f64> {
    let p1 = GeoPoint::new(p1.lat, p1.lon)?;
    let p2 = GeoPoint::new(p2.lat, p2.lon)?;
    let (phi1, phi2) = (p1.lat.to_radians(), p2.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (p2.lon - p1.lon).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieMetric {
    Gower,
    Spatial,
}

impl std::str::FromStr for TieMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gower" => Ok(TieMetric::Gower),
            "spatial" => Ok(TieMetric::Spatial),
            other => Err(Error::Config(format!("unknown tie metric '{other}'"))),
        }
    }
}

impl std::fmt::Display for TieMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TieMetric::Gower => "gower",
            TieMetric::Spatial => "spatial",
        })
    }
}

/// Orders identifiers numerically when both parse as integers, otherwise
/// lexicographically.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// Builds the row-normalised `k`-nearest-tie matrix.
///
/// Raw tie strength is `1 - gower` for the Gower metric and
/// `1 / max(distance, 0.1 km)` for the spatial metric. Ties at the k-th
/// neighbour are broken by ascending individual id.
pub fn build_weight_matrix(
    profiles: &[IndividualProfile],
    metric: TieMetric,
    k: usize,
    contribution_weights: Option<&[f64]>,
) -> Result<WeightMatrix> {
    let q = profiles.len();
    if q < 2 {
        return Err(Error::Domain(format!("need at least 2 individuals, got {q}")));
    }
    if k == 0 {
        return Err(Error::Domain("number of ties must be at least 1".into()));
    }
    let scale = match metric {
        TieMetric::Gower => Some(GowerScale::fit(profiles, contribution_weights)?),
        TieMetric::Spatial => {
            for p in profiles {
                if p.zip_centroid.is_none() {
                    return Err(Error::Schema(format!(
                        "individual '{}' has no coordinates for the spatial metric",
                        p.id
                    )));
                }
            }
            None
        }
    };
    let kk = k.min(q - 1);
    let mut rows = Vec::with_capacity(q);
    let mut candidates: Vec<(usize, f64)> = Vec::with_capacity(q - 1);
    for (i, a) in profiles.iter().enumerate() {
        candidates.clear();
        for (j, b) in profiles.iter().enumerate() {
            if i == j {
                continue;
            }
            let dist = match &scale {
                Some(s) => s.dissimilarity(a, b)?,
                None => geodesic_distance(a.zip_centroid.unwrap(), b.zip_centroid.unwrap())?,
            };
            candidates.push((j, dist));
        }
        candidates.sort_by(|x, y| {
            x.1.partial_cmp(&y.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| compare_ids(&profiles[x.0].id, &profiles[y.0].id))
                .then(x.0.cmp(&y.0))
        });
        let chosen = &candidates[..kk];
        let raw: Vec<f64> = chosen
            .iter()
            .map(|&(_, d)| match metric {
                TieMetric::Gower => 1.0 - d,
                TieMetric::Spatial => 1.0 / d.max(MIN_DISTANCE_KM),
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let row: Vec<(usize, f64)> = if total > 0.0 {
            chosen.iter().zip(&raw).map(|(&(j, _), &w)| (j, w / total)).collect()
        } else {
            chosen.iter().map(|&(j, _)| (j, 1.0 / kk as f64)).collect()
        };
        rows.push(row);
    }
    WeightMatrix::from_rows(rows)
}
