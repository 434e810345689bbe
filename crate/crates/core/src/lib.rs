//! Interdependent integrated choice and latent variable (ICLV) modelling.
//!
//! The crate covers the whole pipeline: social tie matrices, the model's
//! moment algebra, pairwise composite marginal likelihood estimation with a
//! robust sandwich covariance, and an agent-based simulator that forecasts
//! adoption of a new product from a calibrated model.

pub mod cml;
pub mod error;
pub mod io;
pub mod model;
pub mod mvn;
pub mod sim;
pub mod social;

pub use error::{Error, Result};
