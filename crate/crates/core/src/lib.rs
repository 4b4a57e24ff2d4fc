//! Newton-Maxwell dynamics of extended charges in Coulomb gauge.
//!
//! The crate discretizes momentum space on a symmetric Cartesian grid,
//! evolves particles coupled to the transverse field with two independent
//! time integrators, and propagates probability measures on phase space as
//! Monte-Carlo ensembles.

pub mod draws;
pub mod error;
pub mod geometry;
pub mod integrator;
pub mod interaction;
pub mod measures;
pub mod scenarios;
pub mod state;
pub mod summation;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{GridParams, KGrid, PolarizationBasis, QuadratureRule};
pub use interaction::{FormFactor, Model, PotentialSpec};
pub use state::{FieldState, ParticleSpec, ParticleState, PhaseSpacePoint, SobolevWeight};
