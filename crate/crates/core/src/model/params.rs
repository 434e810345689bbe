//! Parameter containers for the structural, measurement and choice parts of
//! the model, plus a flat keyed view used by estimation and file I/O.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One entry of the cross-loading pattern: latent `source` enters the
/// structural equation of latent `target` with coefficient `value`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossLoading {
    pub target: usize,
    pub source: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralParams {
    pub latents: Vec<String>,
    /// Covariate names per latent equation.
    pub covariates: Vec<Vec<String>>,
    /// Coefficients per latent equation, aligned with `covariates`.
    pub alpha: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
    /// Error correlation matrix (unit diagonal).
    pub gamma: DMatrix<f64>,
    /// Nonzero cells of the cross-loading pattern with their coefficients.
    pub cross_loadings: Vec<CrossLoading>,
}

impl StructuralParams {
    pub fn n_latent(&self) -> usize {
        self.latents.len()
    }

    /// Binary pattern matrix with a one wherever a cross-loading is declared.
    pub fn pattern(&self) -> DMatrix<f64> {
        let l = self.n_latent();
        let mut k = DMatrix::zeros(l, l);
        for c in &self.cross_loadings {
            k[(c.target, c.source)] = 1.0;
        }
        k
    }

    /// Cross-loading coefficients placed per the pattern.
    pub fn rho_matrix(&self) -> DMatrix<f64> {
        let l = self.n_latent();
        let mut r = DMatrix::zeros(l, l);
        for c in &self.cross_loadings {
            r[(c.target, c.source)] = c.value;
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementParams {
    pub indicators: Vec<String>,
    /// Number of ordinal categories shared by all indicators.
    pub categories: usize,
    pub intercept: Vec<f64>,
    /// Extra covariates per indicator (the constant is `intercept`).
    pub covariates: Vec<Vec<String>>,
    pub coef: Vec<Vec<f64>>,
    /// `H x L` latent loadings.
    pub loadings: DMatrix<f64>,
    /// Finite thresholds `psi_{h,2} .. psi_{h,J-1}`; `psi_{h,1} = 0`.
    pub thresholds: Vec<Vec<f64>>,
}

impl MeasurementParams {
    pub fn n_indicators(&self) -> usize {
        self.indicators.len()
    }

    /// Threshold `psi_{h,j}` for `j` in `0..=J`, with the infinite ends.
    pub fn psi(&self, h: usize, j: usize) -> f64 {
        let jmax = self.categories;
        if j == 0 {
            f64::NEG_INFINITY
        } else if j == 1 {
            0.0
        } else if j >= jmax {
            f64::INFINITY
        } else {
            self.thresholds[h][j - 2]
        }
    }
}

/// Interaction between a latent variable and an alternative attribute in the
/// utility function.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub latent: usize,
    pub attribute: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceParams {
    pub alternatives: Vec<String>,
    /// Alternative whose latent loadings are fixed at zero.
    pub base_alternative: usize,
    pub attributes: Vec<String>,
    pub b: Vec<f64>,
    /// `L x I` latent loadings; the base column is identically zero.
    pub lambda: DMatrix<f64>,
    pub interactions: Vec<Interaction>,
    /// Differenced error covariance, `(I-1) x (I-1)` with unit top-left cell.
    pub lambda_diff: DMatrix<f64>,
}

impl ChoiceParams {
    pub fn n_alternatives(&self) -> usize {
        self.alternatives.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    /// Undifferenced error covariance `[[0, 0], [0, lambda_diff]]`.
    pub fn lambda_full(&self) -> DMatrix<f64> {
        let i = self.n_alternatives();
        let mut m = DMatrix::zeros(i, i);
        for r in 1..i {
            for c in 1..i {
                m[(r, c)] = self.lambda_diff[(r - 1, c - 1)];
            }
        }
        m
    }
}

/// Address of one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamKey {
    Alpha { latent: usize, covariate: usize },
    Delta { latent: usize },
    GammaCorr { row: usize, col: usize },
    Rho { index: usize },
    Intercept { indicator: usize },
    MeasCoef { indicator: usize, covariate: usize },
    Loading { indicator: usize, latent: usize },
    Threshold { indicator: usize, index: usize },
    B { attribute: usize },
    Lambda { latent: usize, alternative: usize },
    Interaction { index: usize },
    LambdaDiff { row: usize, col: usize },
}

/// A parameter with its current value and estimation status.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub key: ParamKey,
    pub value: f64,
    pub free: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IclvParams {
    pub structural: StructuralParams,
    pub measurement: MeasurementParams,
    pub choice: ChoiceParams,
    /// Keys held at their current value during estimation.
    pub fixed: BTreeSet<ParamKey>,
}

impl IclvParams {
    pub fn n_latent(&self) -> usize {
        self.structural.n_latent()
    }

    /// All scalar parameters in canonical order. Loadings, latent utility
    /// loadings and threshold blocks are listed in full; callers decide
    /// which zero-valued fixed entries to display.
    pub fn keys(&self) -> Vec<ParamKey> {
        let s = &self.structural;
        let m = &self.measurement;
        let c = &self.choice;
        let l = s.n_latent();
        let mut keys = Vec::new();
        for (latent, cov) in s.covariates.iter().enumerate() {
            for covariate in 0..cov.len() {
                keys.push(ParamKey::Alpha { latent, covariate });
            }
        }
        for latent in 0..l {
            keys.push(ParamKey::Delta { latent });
        }
        for row in 0..l {
            for col in 0..row {
                keys.push(ParamKey::GammaCorr { row, col });
            }
        }
        for index in 0..s.cross_loadings.len() {
            keys.push(ParamKey::Rho { index });
        }
        for indicator in 0..m.n_indicators() {
            keys.push(ParamKey::Intercept { indicator });
            for covariate in 0..m.covariates[indicator].len() {
                keys.push(ParamKey::MeasCoef { indicator, covariate });
            }
            for latent in 0..l {
                keys.push(ParamKey::Loading { indicator, latent });
            }
            for index in 0..m.thresholds[indicator].len() {
                keys.push(ParamKey::Threshold { indicator, index });
            }
        }
        for attribute in 0..c.n_attributes() {
            keys.push(ParamKey::B { attribute });
        }
        for alternative in 0..c.n_alternatives() {
            if alternative == c.base_alternative {
                continue;
            }
            for latent in 0..l {
                keys.push(ParamKey::Lambda { latent, alternative });
            }
        }
        for index in 0..c.interactions.len() {
            keys.push(ParamKey::Interaction { index });
        }
        let d = c.n_alternatives().saturating_sub(1);
        for row in 0..d {
            for col in 0..=row {
                if row == 0 && col == 0 {
                    continue;
                }
                keys.push(ParamKey::LambdaDiff { row, col });
            }
        }
        keys
    }

    pub fn entries(&self) -> Vec<ParamEntry> {
        self.keys()
            .into_iter()
            .map(|key| ParamEntry {
                key,
                value: self.get(key),
                free: self.is_free(key),
            })
            .collect()
    }

    pub fn free_keys(&self) -> Vec<ParamKey> {
        self.keys().into_iter().filter(|k| self.is_free(*k)).collect()
    }

    pub fn is_free(&self, key: ParamKey) -> bool {
        !self.fixed.contains(&key)
    }

    pub fn set_free(&mut self, key: ParamKey, free: bool) {
        if free {
            self.fixed.remove(&key);
        } else {
            self.fixed.insert(key);
        }
    }

    pub fn get(&self, key: ParamKey) -> f64 {
        match key {
            ParamKey::Alpha { latent, covariate } => self.structural.alpha[latent][covariate],
            ParamKey::Delta { latent } => self.structural.delta[latent],
            ParamKey::GammaCorr { row, col } => self.structural.gamma[(row, col)],
            ParamKey::Rho { index } => self.structural.cross_loadings[index].value,
            ParamKey::Intercept { indicator } => self.measurement.intercept[indicator],
            ParamKey::MeasCoef { indicator, covariate } => {
                self.measurement.coef[indicator][covariate]
            }
            ParamKey::Loading { indicator, latent } => {
                self.measurement.loadings[(indicator, latent)]
            }
            ParamKey::Threshold { indicator, index } => {
                self.measurement.thresholds[indicator][index]
            }
            ParamKey::B { attribute } => self.choice.b[attribute],
            ParamKey::Lambda { latent, alternative } => self.choice.lambda[(latent, alternative)],
            ParamKey::Interaction { index } => self.choice.interactions[index].value,
            ParamKey::LambdaDiff { row, col } => self.choice.lambda_diff[(row, col)],
        }
    }

    pub fn set(&mut self, key: ParamKey, value: f64) {
        match key {
            ParamKey::Alpha { latent, covariate } => {
                self.structural.alpha[latent][covariate] = value
            }
            ParamKey::Delta { latent } => self.structural.delta[latent] = value,
            ParamKey::GammaCorr { row, col } => {
                self.structural.gamma[(row, col)] = value;
                self.structural.gamma[(col, row)] = value;
            }
            ParamKey::Rho { index } => self.structural.cross_loadings[index].value = value,
            ParamKey::Intercept { indicator } => self.measurement.intercept[indicator] = value,
            ParamKey::MeasCoef { indicator, covariate } => {
                self.measurement.coef[indicator][covariate] = value
            }
            ParamKey::Loading { indicator, latent } => {
                self.measurement.loadings[(indicator, latent)] = value
            }
            ParamKey::Threshold { indicator, index } => {
                self.measurement.thresholds[indicator][index] = value
            }
            ParamKey::B { attribute } => self.choice.b[attribute] = value,
            ParamKey::Lambda { latent, alternative } => {
                self.choice.lambda[(latent, alternative)] = value
            }
            ParamKey::Interaction { index } => self.choice.interactions[index].value = value,
            ParamKey::LambdaDiff { row, col } => {
                self.choice.lambda_diff[(row, col)] = value;
                self.choice.lambda_diff[(col, row)] = value;
            }
        }
    }

    /// Human-readable parameter name.
    pub fn name(&self, key: ParamKey) -> String {
        let s = &self.structural;
        let m = &self.measurement;
        let c = &self.choice;
        match key {
            ParamKey::Alpha { latent, covariate } => {
                format!("alpha[{}:{}]", s.latents[latent], s.covariates[latent][covariate])
            }
            ParamKey::Delta { latent } => format!("delta[{}]", s.latents[latent]),
            ParamKey::GammaCorr { row, col } => {
                format!("gamma[{}:{}]", s.latents[row], s.latents[col])
            }
            ParamKey::Rho { index } => {
                let cl = &s.cross_loadings[index];
                format!("rho[{}<-{}]", s.latents[cl.target], s.latents[cl.source])
            }
            ParamKey::Intercept { indicator } => format!("intercept[{}]", m.indicators[indicator]),
            ParamKey::MeasCoef { indicator, covariate } => format!(
                "meas_coef[{}:{}]",
                m.indicators[indicator], m.covariates[indicator][covariate]
            ),
            ParamKey::Loading { indicator, latent } => {
                format!("loading[{}:{}]", m.indicators[indicator], s.latents[latent])
            }
            ParamKey::Threshold { indicator, index } => {
                format!("threshold[{}:{}]", m.indicators[indicator], index + 3)
            }
            ParamKey::B { attribute } => format!("b[{}]", c.attributes[attribute]),
            ParamKey::Lambda { latent, alternative } => {
                format!("lambda[{}:{}]", s.latents[latent], c.alternatives[alternative])
            }
            ParamKey::Interaction { index } => {
                let it = &c.interactions[index];
                format!("interaction[{}*{}]", s.latents[it.latent], c.attributes[it.attribute])
            }
            ParamKey::LambdaDiff { row, col } => format!("lambda_diff[{}:{}]", row + 1, col + 1),
        }
    }

    /// Checks every parameter invariant the model relies on.
    pub fn validate(&self) -> Result<()> {
        let s = &self.structural;
        let m = &self.measurement;
        let c = &self.choice;
        let l = s.n_latent();
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if l == 0 {
            return bad("no latent variables".into());
        }
        if s.covariates.len() != l || s.alpha.len() != l || s.delta.len() != l {
            return bad("structural blocks do not match the number of latents".into());
        }
        for (cov, a) in s.covariates.iter().zip(&s.alpha) {
            if cov.len() != a.len() {
                return bad("alpha length differs from covariate list".into());
            }
        }
        for (i, &d) in s.delta.iter().enumerate() {
            if !(0.0..1.0).contains(&d) {
                return bad(format!("delta[{}] = {d} outside [0, 1)", s.latents[i]));
            }
        }
        if s.gamma.nrows() != l || s.gamma.ncols() != l {
            return bad("gamma has the wrong shape".into());
        }
        for i in 0..l {
            if (s.gamma[(i, i)] - 1.0).abs() > 1e-12 {
                return bad("gamma must have a unit diagonal".into());
            }
            for j in 0..i {
                if (s.gamma[(i, j)] - s.gamma[(j, i)]).abs() > 1e-12 {
                    return bad("gamma must be symmetric".into());
                }
            }
        }
        if s.gamma.clone().cholesky().is_none() {
            return bad("gamma is not positive definite".into());
        }
        for cl in &s.cross_loadings {
            if cl.target >= l || cl.source >= l || cl.source >= cl.target {
                return bad(format!(
                    "cross-loading {} <- {} is not strictly lower-triangular",
                    cl.target, cl.source
                ));
            }
        }
        let h = m.n_indicators();
        if m.categories < 2 {
            return bad("at least two ordinal categories are required".into());
        }
        if m.intercept.len() != h
            || m.covariates.len() != h
            || m.coef.len() != h
            || m.thresholds.len() != h
            || m.loadings.nrows() != h
            || m.loadings.ncols() != l
        {
            return bad("measurement blocks do not match the number of indicators".into());
        }
        for ind in 0..h {
            if m.covariates[ind].len() != m.coef[ind].len() {
                return bad("measurement coefficient length differs from covariates".into());
            }
            let th = &m.thresholds[ind];
            if th.len() != m.categories - 2 {
                return bad(format!(
                    "indicator '{}' needs {} finite thresholds, has {}",
                    m.indicators[ind],
                    m.categories - 2,
                    th.len()
                ));
            }
            let mut prev = 0.0;
            for &t in th {
                if !(t > prev) {
                    return bad(format!(
                        "thresholds of '{}' are not strictly ascending",
                        m.indicators[ind]
                    ));
                }
                prev = t;
            }
            let free: Vec<bool> = (0..th.len())
                .map(|index| self.is_free(ParamKey::Threshold { indicator: ind, index }))
                .collect();
            if free.iter().any(|&f| f) && !free.iter().all(|&f| f) {
                return bad(format!(
                    "thresholds of '{}' must be all free or all fixed",
                    m.indicators[ind]
                ));
            }
        }
        for lat in 0..l {
            if h > 0 && (0..h).all(|ind| m.loadings[(ind, lat)] == 0.0 && !self.is_free(ParamKey::Loading { indicator: ind, latent: lat })) {
                return bad(format!(
                    "latent '{}' has no measurement loading (not identified)",
                    s.latents[lat]
                ));
            }
        }
        let ni = c.n_alternatives();
        if ni < 2 {
            return bad("at least two alternatives are required".into());
        }
        if c.base_alternative >= ni {
            return bad("base alternative out of range".into());
        }
        if c.b.len() != c.n_attributes() {
            return bad("b length differs from the attribute list".into());
        }
        if c.lambda.nrows() != l || c.lambda.ncols() != ni {
            return bad("lambda has the wrong shape".into());
        }
        for lat in 0..l {
            if c.lambda[(lat, c.base_alternative)] != 0.0 {
                return bad("latent loadings of the base alternative must be zero".into());
            }
        }
        for it in &c.interactions {
            if it.latent >= l || it.attribute >= c.n_attributes() {
                return bad("interaction references an unknown latent or attribute".into());
            }
        }
        if c.lambda_diff.nrows() != ni - 1 || c.lambda_diff.ncols() != ni - 1 {
            return bad("lambda_diff has the wrong shape".into());
        }
        if c.lambda_diff[(0, 0)] != 1.0 {
            return bad("top-left element of lambda_diff must be exactly 1".into());
        }
        if c.lambda_diff.clone().cholesky().is_none() {
            return bad("lambda_diff is not positive definite".into());
        }
        let ld_keys: Vec<ParamKey> = self
            .keys()
            .into_iter()
            .filter(|k| matches!(k, ParamKey::LambdaDiff { .. }))
            .collect();
        if ld_keys.iter().any(|k| self.is_free(*k)) && !ld_keys.iter().all(|k| self.is_free(*k)) {
            return bad("lambda_diff entries must be all free or all fixed".into());
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::small_params;
    use super::*;

    #[test]
    fn fixture_is_valid() {
        small_params(3, 5).validate().unwrap();
    }

    #[test]
    fn get_set_round_trip_over_all_keys() {
        let mut p = small_params(3, 5);
        for (i, key) in p.keys().into_iter().enumerate() {
            let v = 0.01 * i as f64;
            p.set(key, v);
            assert_eq!(p.get(key), v, "{key:?}");
        }
    }

    #[test]
    fn symmetric_setters() {
        let mut p = small_params(2, 5);
        p.set(ParamKey::GammaCorr { row: 1, col: 0 }, -0.2);
        assert_eq!(p.structural.gamma[(0, 1)], -0.2);
    }

    #[test]
    fn rejects_invariant_violations() {
        let mut p = small_params(2, 5);
        p.structural.delta[0] = 1.0;
        assert!(p.validate().is_err());

        let mut p = small_params(2, 5);
        p.measurement.thresholds[0] = vec![1.0, 0.5, 2.0];
        assert!(p.validate().is_err());

        let mut p = small_params(2, 5);
        p.choice.lambda[(0, 0)] = 0.1;
        assert!(p.validate().is_err());

        let mut p = small_params(2, 5);
        p.structural.cross_loadings[0] = CrossLoading { target: 0, source: 1, value: 0.3 };
        assert!(p.validate().is_err());

        let mut p = small_params(2, 5);
        p.choice.lambda_diff[(0, 0)] = 2.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn psi_has_fixed_ends() {
        let p = small_params(1, 5);
        let m = &p.measurement;
        assert_eq!(m.psi(0, 0), f64::NEG_INFINITY);
        assert_eq!(m.psi(0, 1), 0.0);
        assert_eq!(m.psi(0, 2), 0.9);
        assert_eq!(m.psi(0, 5), f64::INFINITY);
    }
}
