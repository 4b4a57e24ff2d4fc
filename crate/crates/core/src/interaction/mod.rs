//! Form factors, potentials and the coupled vector fields.

mod form_factor;
mod hypotheses;
mod model;
mod potential;

pub use form_factor::{FormFactor, FormFactorShape, RadialTable};
pub use hypotheses::{
    check_hypotheses, weighted_norm, HypothesisReport, NormEntry, ParticleHypotheses,
    WeightedNorm, DIVERGENCE_THRESHOLD,
};
pub use model::{dual_test_point, CouplingNorms, Model, VectorPotentialJet};
pub use potential::PotentialSpec;
