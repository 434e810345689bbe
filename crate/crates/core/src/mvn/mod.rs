//! Normal distribution kernels: Halton draws, univariate and bivariate
//! primitives, and the GHK simulator.

mod ghk;
mod halton;
mod normal;

pub use ghk::{mvn_cdf_ghk, mvn_cdf_rect, rect_probability, CdfMethod, MvnSpec};
pub use halton::{halton_sequence, HaltonDraws, DEFAULT_SKIP, MAX_DIMENSION};
pub use normal::{
    bvn_cdf, bvn_rect, normal_interval, std_normal_cdf, std_normal_pdf, std_normal_quantile,
};
