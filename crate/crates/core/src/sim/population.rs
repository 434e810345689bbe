//! Synthetic household population for desk-scale simulation runs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use super::Agent;
use crate::social::GeoPoint;

/// Illustrative zip codes: `(zip, latitude, longitude, square miles)`.
pub const SYNTHETIC_ZIPS: [(&str, f64, f64, f64); 10] = [
    ("37203", 36.150, -86.790, 5.0),
    ("37204", 36.107, -86.774, 7.2),
    ("37206", 36.180, -86.730, 7.7),
    ("37207", 36.230, -86.770, 25.0),
    ("37208", 36.175, -86.805, 5.9),
    ("37209", 36.150, -86.860, 19.5),
    ("37211", 36.070, -86.720, 23.8),
    ("37212", 36.135, -86.800, 2.6),
    ("37214", 36.170, -86.670, 19.6),
    ("37215", 36.100, -86.820, 13.6),
];

/// Covariates compared when building social ties among synthetic agents.
pub const TIE_COVARIATES: [&str; 10] = [
    "edu_some_college",
    "edu_college_grad",
    "edu_graduate",
    "edu_professional",
    "inc_le_35k",
    "inc_36_75k",
    "workers",
    "children",
    "male",
    "vehicles",
];

pub fn zip_areas() -> BTreeMap<String, f64> {
    SYNTHETIC_ZIPS
        .iter()
        .map(|&(z, _, _, a)| (z.to_string(), a))
        .collect()
}

fn pick<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// `n` households with the socio-demographic, accident-history and
/// conventional-car price covariates used by the reference model.
pub fn synthetic_population(n: usize, seed: u64) -> Vec<Agent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let price = LogNormal::new(35_000f64.ln(), 0.3).expect("valid lognormal");
    (0..n)
        .map(|i| {
            let (zip, lat, lon, _) = SYNTHETIC_ZIPS[pick(&mut rng, &[0.1; 10])];
            let location = GeoPoint::new(
                lat + rng.gen_range(-0.01..0.01),
                lon + rng.gen_range(-0.01..0.01),
            )
            .expect("coordinates inside range");
            let edu = pick(&mut rng, &[0.35, 0.35, 0.22, 0.08]);
            let income = pick(&mut rng, &[0.25, 0.33, 0.42]);
            let workers = pick(&mut rng, &[0.2, 0.4, 0.3, 0.1]) as f64;
            let children = pick(&mut rng, &[0.6, 0.2, 0.15, 0.05]) as f64;
            let vehicles = pick(&mut rng, &[0.05, 0.35, 0.4, 0.15, 0.05]) as f64;
            let mut cov = BTreeMap::new();
            let mut put = |k: &str, v: f64| {
                cov.insert(k.to_string(), v);
            };
            put("edu_some_college", (edu == 0) as u8 as f64);
            put("edu_college_grad", (edu == 1) as u8 as f64);
            put("edu_graduate", (edu == 2) as u8 as f64);
            put("edu_professional", (edu == 3) as u8 as f64);
            put("inc_le_35k", (income == 0) as u8 as f64);
            put("inc_36_75k", (income == 1) as u8 as f64);
            put("workers", workers);
            put("children", children);
            put("male", rng.gen_bool(0.5) as u8 as f64);
            put("vehicles", vehicles);
            put("src_colleague", 0.0);
            put("minor_damage", rng.gen_bool(0.08) as u8 as f64);
            put("major_damage", rng.gen_bool(0.04) as u8 as f64);
            put("minor_injury", rng.gen_bool(0.05) as u8 as f64);
            put("severe_injury", rng.gen_bool(0.02) as u8 as f64);
            let cv_price = price.sample(&mut rng).clamp(12_000.0, 90_000.0).round();
            Agent {
                id: (i + 1).to_string(),
                zip: zip.to_string(),
                location: Some(location),
                cv_price,
                covariates: cov,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_is_reproducible_and_one_hot() {
        let a = synthetic_population(50, 3);
        assert_eq!(a, synthetic_population(50, 3));
        for ag in &a {
            let edu: f64 = ["edu_some_college", "edu_college_grad", "edu_graduate", "edu_professional"]
                .iter()
                .map(|k| ag.covariates[*k])
                .sum();
            assert_eq!(edu, 1.0);
            assert!(ag.cv_price >= 12_000.0);
        }
    }
}
