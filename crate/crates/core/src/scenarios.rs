//! Built-in scenarios used by the verification suites.

use num_complex::Complex64;

use crate::error::Result;
use crate::geometry::KGrid;
use crate::interaction::{FormFactor, Model, PotentialSpec};
use crate::measures::{FieldMode, MeasureSpec};
use crate::state::{FieldState, ParticleSpec, ParticleState, PhaseSpacePoint};

/// Charge of both reference particles.
pub const CHARGE: f64 = 0.5;

/// A model together with an initial state.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: Model,
    pub initial: PhaseSpacePoint,
}

/// Two Gaussian charges with smeared Coulomb repulsion on a coarse
/// three-dimensional grid (`K = 2`, 8 nodes per axis).
pub fn reference() -> Result<Scenario> {
    reference_on(KGrid::build(3, 2.0, 8)?)
}

pub fn reference_on(grid: KGrid) -> Result<Scenario> {
    let spec = ParticleSpec::new(
        vec![1.0, 2.0],
        vec![
            FormFactor::gaussian(1.0).with_charge(CHARGE),
            FormFactor::gaussian(1.0).with_charge(CHARGE),
        ],
    )?;
    let model = Model::new(grid, spec, PotentialSpec::SmearedCoulomb { g: 1.0 })?;
    let initial = reference_state(&model)?;
    Ok(Scenario { model, initial })
}

fn reference_state(model: &Model) -> Result<PhaseSpacePoint> {
    let grid = model.grid();
    let particles = ParticleState::new(
        3,
        vec![0.3, 0.1, 0.0, -0.15, 0.0, 0.05],
        vec![-0.3, 0.0, 0.1, 0.3, 0.1, 0.0],
    )?;
    let field = FieldState::from_fn(grid, |j, lambda| {
        let k = grid.node(j);
        let r = grid.norm(j);
        let env = 0.3 * (-0.5 * r * r).exp();
        match lambda {
            0 => Complex64::from_polar(env, 0.7 * k[0]),
            _ => Complex64::new(0.0, 0.5 * env),
        }
    });
    Ok(PhaseSpacePoint::new(particles, field))
}

/// Gaussian measure centred on the reference state that perturbs every
/// particle coordinate and the lowest field modes.
pub fn reference_gaussian_measure(scenario: &Scenario, particle_scale: f64, mode_variance: f64) -> MeasureSpec {
    let grid = scenario.model.grid();
    let rmin = grid.norms().iter().copied().fold(f64::INFINITY, f64::min);
    let modes = (0..grid.len())
        .filter(|&j| grid.norm(j) <= rmin * (1.0 + 1e-12))
        .flat_map(|j| {
            (0..grid.polarizations()).map(move |polarization| FieldMode {
                node: j,
                polarization,
                variance: mode_variance,
            })
        })
        .collect();
    MeasureSpec::Gaussian {
        center: scenario.initial.clone(),
        particle_scale,
        modes,
    }
}
