//! Integrability checks on the form factors.
//!
//! Each weighted norm is computed on the working grid and on a probe grid
//! with both the cutoff and the node count doubled. A norm whose value grows
//! by more than [`DIVERGENCE_THRESHOLD`] under this refinement is flagged.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::KGrid;
use crate::state::ParticleSpec;

use super::FormFactor;

/// Relative growth under refinement above which a norm counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightedNorm {
    /// `|| chi / |k| ||`
    InverseK,
    /// `|| chi / sqrt|k| ||`
    InverseSqrtK,
    /// `|| sqrt|k| chi ||`
    SqrtK,
    /// `|| |k|^{3/2 - sigma} chi ||`
    Sobolev,
}

impl WeightedNorm {
    pub const ALL: [WeightedNorm; 4] = [
        WeightedNorm::InverseK,
        WeightedNorm::InverseSqrtK,
        WeightedNorm::SqrtK,
        WeightedNorm::Sobolev,
    ];

    /// Squared radial weight multiplying `chi^2`.
    fn weight(self, r: f64, sigma: f64) -> f64 {
        match self {
            WeightedNorm::InverseK => 1.0 / (r * r),
            WeightedNorm::InverseSqrtK => 1.0 / r,
            WeightedNorm::SqrtK => r,
            WeightedNorm::Sobolev => r.powf(3.0 - 2.0 * sigma),
        }
    }
}

/// `|| w(|k|) chi ||_{L^2}` on `grid` for the weight selected by `norm`.
pub fn weighted_norm(grid: &KGrid, chi: &FormFactor, norm: WeightedNorm, sigma: f64) -> f64 {
    grid.integrate_radial(|r| {
        let c = chi.eval(r);
        norm.weight(r, sigma) * c * c
    })
    .sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct NormEntry {
    pub norm: WeightedNorm,
    pub value: f64,
    pub refined_value: f64,
    pub divergent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParticleHypotheses {
    pub particle: usize,
    pub family: &'static str,
    pub norms: Vec<NormEntry>,
}

impl ParticleHypotheses {
    pub fn flagged(&self) -> bool {
        self.norms.iter().any(|n| n.divergent)
    }

    pub fn value(&self, norm: WeightedNorm) -> f64 {
        self.norms
            .iter()
            .find(|n| n.norm == norm)
            .map(|n| n.value)
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub sigma: f64,
    pub particles: Vec<ParticleHypotheses>,
}

impl HypothesisReport {
    pub fn flagged_particles(&self) -> Vec<usize> {
        self.particles
            .iter()
            .filter(|p| p.flagged())
            .map(|p| p.particle)
            .collect()
    }

    pub fn is_flagged(&self) -> bool {
        self.particles.iter().any(ParticleHypotheses::flagged)
    }

    /// `Err(HypothesisFlagged)` when any particle has a divergent norm.
    pub fn ensure_admissible(&self) -> Result<()> {
        let particles = self.flagged_particles();
        if particles.is_empty() {
            return Ok(());
        }
        let names: Vec<String> = self
            .particles
            .iter()
            .filter(|p| p.flagged())
            .flat_map(|p| {
                p.norms
                    .iter()
                    .filter(|n| n.divergent)
                    .map(move |n| format!("particle {} {:?}", p.particle, n.norm))
            })
            .collect();
        Err(Error::HypothesisFlagged {
            particles,
            reason: format!("norms grow under refinement: {}", names.join(", ")),
        })
    }
}

pub fn check_hypotheses(spec: &ParticleSpec, sigma: f64, grid: &KGrid) -> Result<HypothesisReport> {
    if !(0.5..=1.0).contains(&sigma) {
        return Err(Error::InvalidArgument(format!(
            "hypothesis exponent must lie in [1/2, 1], got {sigma}"
        )));
    }
    let refined = grid.refined()?;
    let particles = spec
        .form_factors()
        .iter()
        .enumerate()
        .map(|(i, chi)| ParticleHypotheses {
            particle: i,
            family: chi.family(),
            norms: WeightedNorm::ALL
                .iter()
                .map(|&norm| {
                    let value = weighted_norm(grid, chi, norm, sigma);
                    let refined_value = weighted_norm(&refined, chi, norm, sigma);
                    NormEntry {
                        norm,
                        value,
                        refined_value,
                        divergent: refined_value > (1.0 + DIVERGENCE_THRESHOLD) * value,
                    }
                })
                .collect(),
        })
        .collect();
    Ok(HypothesisReport { sigma, particles })
}
