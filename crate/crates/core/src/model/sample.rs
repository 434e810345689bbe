use nalgebra::DMatrix;

use super::params::IclvParams;
use crate::error::{Error, Result};

/// One stated-preference choice occasion.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceTask {
    /// `M x I` attribute matrix, one column per alternative.
    pub attributes: DMatrix<f64>,
    /// Index of the chosen alternative.
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: String,
    /// Structural covariates per latent, aligned with the parameter lists.
    pub structural: Vec<Vec<f64>>,
    /// Measurement covariates per indicator (constant excluded).
    pub measurement: Vec<Vec<f64>>,
    /// Ordinal responses, `1..=J` per indicator.
    pub responses: Vec<u8>,
    pub tasks: Vec<ChoiceTask>,
}

/// Observed data for `Q` individuals with a common number of tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub individuals: Vec<Individual>,
}

impl Sample {
    pub fn q(&self) -> usize {
        self.individuals.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.individuals.first().map_or(0, |i| i.tasks.len())
    }

    /// Checks shapes and ranges against a parameter structure.
    pub fn validate(&self, params: &IclvParams) -> Result<()> {
        let s = &params.structural;
        let m = &params.measurement;
        let c = &params.choice;
        let t = self.n_tasks();
        if self.individuals.is_empty() {
            return Err(Error::Schema("sample is empty".into()));
        }
        for ind in &self.individuals {
            let bad = |msg: String| Err(Error::Schema(format!("individual '{}': {msg}", ind.id)));
            if ind.structural.len() != s.n_latent()
                || ind.structural.iter().zip(&s.covariates).any(|(x, n)| x.len() != n.len())
            {
                return bad("structural covariates do not match the model".into());
            }
            if ind.measurement.len() != m.n_indicators()
                || ind.measurement.iter().zip(&m.covariates).any(|(x, n)| x.len() != n.len())
            {
                return bad("measurement covariates do not match the model".into());
            }
            if ind.responses.len() != m.n_indicators() {
                return bad("wrong number of indicator responses".into());
            }
            if ind
                .responses
                .iter()
                .any(|&y| y == 0 || y as usize > m.categories)
            {
                return bad(format!("responses must lie in 1..={}", m.categories));
            }
            if ind.tasks.len() != t {
                return bad("individuals must share the number of choice tasks".into());
            }
            for task in &ind.tasks {
                if task.attributes.nrows() != c.n_attributes()
                    || task.attributes.ncols() != c.n_alternatives()
                {
                    return bad("choice attribute matrix has the wrong shape".into());
                }
                if task.chosen >= c.n_alternatives() {
                    return bad("chosen alternative out of range".into());
                }
                if task.attributes.iter().any(|v| !v.is_finite()) {
                    return bad("non-finite choice attribute".into());
                }
            }
            if ind
                .structural
                .iter()
                .chain(&ind.measurement)
                .flatten()
                .any(|v| !v.is_finite())
            {
                return bad("non-finite covariate".into());
            }
        }
        Ok(())
    }
}
