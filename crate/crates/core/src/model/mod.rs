//! Model structure: parameters, observed data, structural operators and the
//! implied moments of the stacked propensity/utility vector.

pub mod moments;
pub mod params;
pub mod sample;
pub mod structural;
pub mod synth;

pub use moments::{
    build_differencing, choice_utility_systematic, differenced_moments, individual_loadings,
    joint_from_latent, joint_moments, DifferencedMoments, DifferencingMatrix,
    IndividualLoadings, JointMoments,
};
pub use params::{
    ChoiceParams, CrossLoading, IclvParams, Interaction, MeasurementParams, ParamEntry, ParamKey,
    StructuralParams,
};
pub use sample::{ChoiceTask, Individual, Sample};
pub use structural::{
    build_moderation, build_spatial_operator, latent_moments, LatentMoments, LatentStructure,
    SpatialOperator, DENSE_LIMIT,
};
pub use synth::{categorize, simulate_latents, simulate_sample, Dist, SyntheticDesign};
