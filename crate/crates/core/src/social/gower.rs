use super::{AttributeValue, IndividualProfile};
use crate::error::{Error, Result};

/// Gower dissimilarity between two profiles.
///
/// Continuous attributes contribute `|a - b| / range` (zero when the range is
/// zero), categorical attributes contribute 0 on a match and 1 otherwise. The
/// result is the contribution-weighted mean.
pub fn gower_dissimilarity(
    a: &IndividualProfile,
    b: &IndividualProfile,
    contribution_weights: &[f64],
    ranges: &[f64],
) -> Result<f64> {
    let n = a.attributes.len();
    if b.attributes.len() != n || contribution_weights.len() != n || ranges.len() != n {
        return Err(Error::Schema(format!(
            "attribute counts differ: {} vs {} ({} weights, {} ranges)",
            n,
            b.attributes.len(),
            contribution_weights.len(),
            ranges.len()
        )));
    }
    if contribution_weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::DegenerateWeights("negative contribution weight".into()));
    }
    let total_weight: f64 = contribution_weights.iter().sum();
    if !(total_weight > 0.0) {
        return Err(Error::DegenerateWeights("all contribution weights are zero".into()));
    }
    let mut acc = 0.0;
    for (k, ((name_a, va), (name_b, vb))) in a.attributes.iter().zip(&b.attributes).enumerate() {
        if name_a != name_b {
            return Err(Error::Schema(format!(
                "attribute {k} is '{name_a}' for '{}' but '{name_b}' for '{}'",
                a.id, b.id
            )));
        }
        let contribution = match (va, vb) {
            (AttributeValue::Continuous(x), AttributeValue::Continuous(y)) => {
                if ranges[k] > 0.0 {
                    ((x - y).abs() / ranges[k]).min(1.0)
                } else {
                    0.0
                }
            }
            (AttributeValue::Categorical(x), AttributeValue::Categorical(y)) => {
                if x == y {
                    0.0
                } else {
                    1.0
                }
            }
            _ => {
                return Err(Error::Schema(format!(
                    "attribute '{name_a}' mixes continuous and categorical values"
                )))
            }
        };
        acc += contribution_weights[k] * contribution;
    }
    Ok(acc / total_weight)
}

/// Sample-level ranges and contribution weights for Gower dissimilarity.
#[derive(Debug, Clone)]
pub struct GowerScale {
    names: Vec<String>,
    weights: Vec<f64>,
    ranges: Vec<f64>,
}

impl GowerScale {
    /// Continuous ranges are taken over the whole sample. Weights default to
    /// equal contributions.
    pub fn fit(profiles: &[IndividualProfile], weights: Option<&[f64]>) -> Result<Self> {
        let first = profiles
            .first()
            .ok_or_else(|| Error::Domain("no profiles".into()))?;
        let names: Vec<String> = first.attributes.iter().map(|(n, _)| n.clone()).collect();
        if names.is_empty() {
            return Err(Error::Schema("profiles carry no attributes".into()));
        }
        let n = names.len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in profiles {
            if p.attributes.len() != n
                || p.attributes.iter().zip(&names).any(|((name, _), want)| name != want)
            {
                return Err(Error::Schema(format!(
                    "profile '{}' does not match the attribute schema",
                    p.id
                )));
            }
            for (k, (_, v)) in p.attributes.iter().enumerate() {
                if let AttributeValue::Continuous(x) = v {
                    if !x.is_finite() {
                        return Err(Error::Schema(format!(
                            "non-finite value for '{}' in profile '{}'",
                            names[k], p.id
                        )));
                    }
                    lo[k] = lo[k].min(*x);
                    hi[k] = hi[k].max(*x);
                }
            }
        }
        let ranges = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| if h > l { h - l } else { 0.0 })
            .collect();
        let weights = match weights {
            Some(w) => {
                if w.len() != n {
                    return Err(Error::Schema(format!(
                        "{} contribution weights for {n} attributes",
                        w.len()
                    )));
                }
                w.to_vec()
            }
            None => vec![1.0; n],
        };
        if !(weights.iter().sum::<f64>() > 0.0) {
            return Err(Error::DegenerateWeights("all contribution weights are zero".into()));
        }
        Ok(Self {
            names,
            weights,
            ranges,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dissimilarity(&self, a: &IndividualProfile, b: &IndividualProfile) -> Result<f64> {
        gower_dissimilarity(a, b, &self.weights, &self.ranges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn profile(id: &str, age: f64, income: f64, gender: &str, eth: &str, edu: &str) -> IndividualProfile {
        IndividualProfile {
            id: id.into(),
            zip_centroid: None,
            attributes: vec![
                ("age".into(), AttributeValue::Continuous(age)),
                ("income".into(), AttributeValue::Continuous(income)),
                ("gender".into(), AttributeValue::Categorical(gender.into())),
                ("ethnicity".into(), AttributeValue::Categorical(eth.into())),
                ("education".into(), AttributeValue::Categorical(edu.into())),
            ],
        }
    }

    #[test]
    fn identical_is_zero() {
        let a = profile("1", 40.0, 3.0, "f", "white", "college");
        let s = GowerScale::fit(&[a.clone(), profile("2", 20.0, 1.0, "m", "other", "hs")], None).unwrap();
        assert_eq!(s.dissimilarity(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn one_categorical_mismatch_of_five() {
        let a = profile("1", 40.0, 3.0, "f", "white", "college");
        let b = profile("2", 40.0, 3.0, "m", "white", "college");
        // Hand evaluation: contributions (0, 0, 1, 0, 0), equal weights -> 1/5.
        let s = GowerScale::fit(&[a.clone(), b.clone()], None).unwrap();
        assert!((s.dissimilarity(&a, &b).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn continuous_uses_sample_range() {
        let a = profile("1", 20.0, 1.0, "f", "w", "c");
        let b = profile("2", 30.0, 1.0, "f", "w", "c");
        let c = profile("3", 60.0, 1.0, "f", "w", "c");
        let s = GowerScale::fit(&[a.clone(), b.clone(), c], None).unwrap();
        // |20-30|/40 over 5 attributes; income has zero range.
        assert!((s.dissimilarity(&a, &b).unwrap() - 0.25 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_and_bounded() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let cats = ["a", "b", "c"];
        let ps: Vec<_> = (0..40)
            .map(|i| {
                profile(
                    &i.to_string(),
                    rng.gen_range(18.0..90.0),
                    rng.gen_range(0.0..5.0),
                    cats[rng.gen_range(0..2)],
                    cats[rng.gen_range(0..3)],
                    cats[rng.gen_range(0..3)],
                )
            })
            .collect();
        let s = GowerScale::fit(&ps, None).unwrap();
        for _ in 0..100 {
            let i = rng.gen_range(0..40);
            let j = rng.gen_range(0..40);
            let g = s.dissimilarity(&ps[i], &ps[j]).unwrap();
            assert_eq!(g, s.dissimilarity(&ps[j], &ps[i]).unwrap());
            assert!((0.0..=1.0).contains(&g));
        }
    }

    #[test]
    fn schema_mismatch_and_zero_weights() {
        let a = profile("1", 40.0, 3.0, "f", "white", "college");
        let mut b = a.clone();
        b.attributes[0].0 = "years".into();
        let w = [1.0; 5];
        let r = [1.0; 5];
        assert!(matches!(gower_dissimilarity(&a, &b, &w, &r), Err(Error::Schema(_))));
        assert!(matches!(
            gower_dissimilarity(&a, &a, &[0.0; 5], &r),
            Err(Error::DegenerateWeights(_))
        ));
    }
}
