//! Pairwise composite marginal likelihood estimation.

mod estimate;
mod likelihood;
mod reparam;
mod selection;

pub use estimate::{
    clic, estimate, maximize_cml, sandwich_covariance, window_jacobian, Convergence,
    EstimateOptions, EstimationResult, Objective, Sandwich,
};
pub use likelihood::{
    cml_loglik, enumerate_pairs, CmlModel, CmlOptions, CmlValue, Evaluation, TermKind,
    PROBABILITY_FLOOR,
};
pub use reparam::{correlation_from_partials, partial_correlations, Reparam};
pub use selection::{pair_loglik, PairSelection};
