//! Fixed-step time integration.
//!
//! Two independent schemes are provided. [`Scheme::Strang`] splits the exact
//! free flow from a Runge-Kutta kick of `G`; [`Scheme::InteractionRk4`] runs
//! classical RK4 on the interaction-picture field `vartheta` and maps back to
//! physical variables with the free flow.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::Model;
use crate::state::{phase_norm, ParticleState, PhaseSpacePoint, SobolevWeight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Strang,
    InteractionRk4,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Strang => "strang",
            Scheme::InteractionRk4 => "interaction-rk4",
        }
    }
}

/// One classical RK4 step for the autonomous field `f`.
fn rk4<F>(u: &PhaseSpacePoint, dt: f64, f: F) -> PhaseSpacePoint
where
    F: Fn(f64, &PhaseSpacePoint) -> PhaseSpacePoint,
{
    let k1 = f(0.0, u);
    let k2 = f(0.5, &u.add(&k1.scaled(0.5 * dt)));
    let k3 = f(0.5, &u.add(&k2.scaled(0.5 * dt)));
    let k4 = f(1.0, &u.add(&k3.scaled(dt)));
    let mut out = u.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    out
}

/// `Phi^0_{dt/2} o Kick_dt o Phi^0_{dt/2}` with an RK4 kick of `du/dt = G(u)`.
pub fn strang_step(model: &Model, u: &PhaseSpacePoint, dt: f64) -> PhaseSpacePoint {
    let half = model.free_flow(0.5 * dt);
    let mut v = half.applied(u);
    v = rk4(&v, dt, |_, w| model.nonlinearity_g(w));
    half.apply(&mut v);
    v
}

/// One RK4 step of `du~/dt = vartheta(t, u~)` from time `t`.
pub fn rk4_interaction_step(model: &Model, t: f64, u: &PhaseSpacePoint, dt: f64) -> PhaseSpacePoint {
    rk4(u, dt, |c, w| model.vartheta(t + c * dt, w))
}

/// Diagnostics recomputed at every stored sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub hamiltonian: f64,
    pub norm_x0: f64,
    pub norm_x12: f64,
    pub norm_x1: f64,
}

impl Diagnostics {
    pub fn of(model: &Model, u: &PhaseSpacePoint) -> Self {
        let g = model.grid();
        Self {
            hamiltonian: model.hamiltonian(u),
            norm_x0: phase_norm(g, u, SobolevWeight::inhomogeneous(0.0)),
            norm_x12: phase_norm(g, u, SobolevWeight::inhomogeneous(0.5)),
            norm_x1: phase_norm(g, u, SobolevWeight::inhomogeneous(1.0)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub diagnostics: Diagnostics,
    pub particles: ParticleState,
    /// Full physical state, present when requested.
    pub state: Option<PhaseSpacePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Store a sample every this many steps (the final step is always stored).
    pub sample_every: usize,
    /// Keep full states, not only particles and diagnostics.
    pub keep_states: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            sample_every: 1,
            keep_states: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub dt: f64,
    pub steps: usize,
    pub samples: Vec<Sample>,
    /// Physical state at the last step.
    pub final_state: PhaseSpacePoint,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn end_time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Writes `t, H, norm_X0, norm_X12, norm_X1, p..., q...` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let Some(first) = self.samples.first() else {
            return Ok(());
        };
        let n = first.particles.count();
        let d = first.particles.dim();
        let mut header = vec!["t", "H", "norm_X0", "norm_X12", "norm_X1"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        for block in ["p", "q"] {
            for i in 0..n {
                for nu in 0..d {
                    header.push(format!("{block}_{i}_{nu}"));
                }
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            write_row(&mut w, s)?;
        }
        Ok(())
    }
}

pub(crate) fn write_row<W: Write>(w: &mut W, s: &Sample) -> std::io::Result<()> {
    let d = &s.diagnostics;
    write!(
        w,
        "{},{},{},{},{}",
        s.t, d.hamiltonian, d.norm_x0, d.norm_x12, d.norm_x1
    )?;
    for x in s.particles.p.iter().chain(&s.particles.q) {
        write!(w, ",{x}")?;
    }
    writeln!(w)
}

/// Number of steps of size `dt` covering `t_end`; both must share a sign.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt != 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need finite non-zero dt and finite T, got dt = {dt}, T = {t_end}"
        )));
    }
    if t_end == 0.0 {
        return Ok(0);
    }
    let ratio = t_end / dt;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt} does not divide T = {t_end}"
        )));
    }
    Ok(steps as usize)
}

fn make_sample(model: &Model, step: usize, t: f64, u: &PhaseSpacePoint, keep: bool) -> Sample {
    Sample {
        step,
        t,
        diagnostics: Diagnostics::of(model, u),
        particles: u.particles.clone(),
        state: keep.then(|| u.clone()),
    }
}

/// Evolves `u0` to time `t_end` with fixed step `dt`.
///
/// Stored states are always physical variables.
pub fn evolve(
    model: &Model,
    u0: &PhaseSpacePoint,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
    options: EvolveOptions,
) -> Result<Trajectory> {
    model.check_state(u0)?;
    let steps = step_count(t_end, dt)?;
    let every = options.sample_every.max(1);
    let mut samples = vec![make_sample(model, 0, 0.0, u0, options.keep_states)];

    let mut u = u0.clone();
    for step in 1..=steps {
        let t_prev = (step - 1) as f64 * dt;
        let t = step as f64 * dt;
        u = match scheme {
            Scheme::Strang => strang_step(model, &u, dt),
            Scheme::InteractionRk4 => rk4_interaction_step(model, t_prev, &u, dt),
        };
        if !u.is_finite() {
            let physical = match scheme {
                Scheme::Strang => u,
                Scheme::InteractionRk4 => model.free_flow(t).applied(&u),
            };
            return Err(Error::NonFinite {
                step,
                time: t,
                state: Box::new(physical),
            });
        }
        if step % every == 0 || step == steps {
            let physical = match scheme {
                Scheme::Strang => u.clone(),
                Scheme::InteractionRk4 => model.free_flow(t).applied(&u),
            };
            samples.push(make_sample(model, step, t, &physical, options.keep_states));
        }
    }
    let final_state = match scheme {
        Scheme::Strang => u,
        Scheme::InteractionRk4 => model.free_flow(steps as f64 * dt).applied(&u),
    };
    Ok(Trajectory {
        scheme,
        dt,
        steps,
        samples,
        final_state,
    })
}

/// Endpoint of [`evolve`] without stored diagnostics.
pub fn evolve_endpoint(
    model: &Model,
    u0: &PhaseSpacePoint,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<PhaseSpacePoint> {
    model.check_state(u0)?;
    let steps = step_count(t_end, dt)?;
    let mut u = u0.clone();
    for step in 1..=steps {
        let t_prev = (step - 1) as f64 * dt;
        u = match scheme {
            Scheme::Strang => strang_step(model, &u, dt),
            Scheme::InteractionRk4 => rk4_interaction_step(model, t_prev, &u, dt),
        };
        if !u.is_finite() {
            return Err(Error::NonFinite {
                step,
                time: step as f64 * dt,
                state: Box::new(u),
            });
        }
    }
    Ok(match scheme {
        Scheme::Strang => u,
        Scheme::InteractionRk4 => model.free_flow(steps as f64 * dt).applied(&u),
    })
}

/// Separation of two trajectories started `epsilon` apart.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceReport {
    pub epsilon: f64,
    pub times: Vec<f64>,
    /// `|| u_1(t) - u_2(t) ||_{X^0}`
    pub distances: Vec<f64>,
    /// Smallest `C` with `d(t) <= epsilon e^{C t}` at every sample.
    pub growth_constant: f64,
    /// Least-squares slope of `ln(d / epsilon)` against `t` through the origin.
    pub log_slope: f64,
    /// Samples exceeding `epsilon e^{C t}` by more than the relative slack.
    pub violations: usize,
}

/// Relative slack allowed when counting envelope violations.
pub const ENVELOPE_SLACK: f64 = 1e-9;

/// Evolves `u0` and `u0 + epsilon * direction` and records their distance.
#[allow(clippy::too_many_arguments)]
pub fn divergence_report(
    model: &Model,
    u0: &PhaseSpacePoint,
    epsilon: f64,
    direction: &PhaseSpacePoint,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
    sample_every: usize,
) -> Result<DivergenceReport> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "perturbation size must be positive, got {epsilon}"
        )));
    }
    let dir_norm = phase_norm(model.grid(), direction, SobolevWeight::inhomogeneous(0.0));
    if (dir_norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "direction must have unit X^0 norm, got {dir_norm}"
        )));
    }
    let mut perturbed = u0.clone();
    perturbed.axpy(epsilon, direction);
    let options = EvolveOptions {
        sample_every,
        keep_states: true,
    };
    let a = evolve(model, u0, t_end, dt, scheme, options)?;
    let b = evolve(model, &perturbed, t_end, dt, scheme, options)?;
    let mut times = Vec::with_capacity(a.samples.len());
    let mut distances = Vec::with_capacity(a.samples.len());
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        let (ua, ub) = (sa.state.as_ref(), sb.state.as_ref());
        let diff = ua.expect("states kept").sub(ub.expect("states kept"));
        times.push(sa.t);
        distances.push(phase_norm(model.grid(), &diff, SobolevWeight::inhomogeneous(0.0)));
    }
    let (growth_constant, log_slope) = fit_growth(epsilon, &times, &distances);
    let violations = count_violations(epsilon, growth_constant, &times, &distances);
    Ok(DivergenceReport {
        epsilon,
        times,
        distances,
        growth_constant,
        log_slope,
        violations,
    })
}

/// Returns the tight envelope constant and the least-squares log slope.
pub fn fit_growth(epsilon: f64, times: &[f64], distances: &[f64]) -> (f64, f64) {
    let mut tight: f64 = 0.0;
    let (mut num, mut den) = (0.0, 0.0);
    for (&t, &d) in times.iter().zip(distances) {
        if t.abs() == 0.0 || d <= 0.0 {
            continue;
        }
        let y = (d / epsilon).ln();
        tight = tight.max(y / t.abs());
        num += t.abs() * y;
        den += t * t;
    }
    let slope = if den > 0.0 { num / den } else { 0.0 };
    (tight, slope)
}

pub fn count_violations(epsilon: f64, c: f64, times: &[f64], distances: &[f64]) -> usize {
    times
        .iter()
        .zip(distances)
        .filter(|(&t, &d)| d > epsilon * (c * t.abs()).exp() * (1.0 + ENVELOPE_SLACK))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::draws::{random_point, DrawScales};
    use crate::geometry::KGrid;
    use crate::interaction::{FormFactor, PotentialSpec};
    use crate::state::{free_flow, ParticleSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coupled() -> Model {
        let grid = KGrid::build(3, 2.0, 6).unwrap();
        let spec = ParticleSpec::new(
            vec![1.0, 1.5],
            vec![FormFactor::gaussian(1.0), FormFactor::gaussian(1.0)],
        )
        .unwrap();
        Model::new(grid, spec, PotentialSpec::SmearedCoulomb { g: 0.5 }).unwrap()
    }

    fn decoupled() -> Model {
        let grid = KGrid::build(3, 2.0, 6).unwrap();
        let chi = FormFactor::gaussian(1.0).with_charge(0.0);
        let spec = ParticleSpec::new(vec![2.0], vec![chi]).unwrap();
        Model::new(grid, spec, PotentialSpec::Zero).unwrap()
    }

    fn draw(m: &Model, seed: u64) -> PhaseSpacePoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scales = DrawScales {
            field: 0.3,
            ..DrawScales::default()
        };
        random_point(m.grid(), m.particles(), scales, &mut rng)
    }

    fn dist(m: &Model, a: &PhaseSpacePoint, b: &PhaseSpacePoint) -> f64 {
        phase_norm(m.grid(), &a.sub(b), SobolevWeight::inhomogeneous(0.0))
    }

    #[test]
    fn decoupled_strang_step_is_free_flow() {
        let m = decoupled();
        let u = draw(&m, 1);
        let a = strang_step(&m, &u, 0.1);
        let b = free_flow(m.grid(), &u, 0.1, m.spec());
        assert!(dist(&m, &a, &b) < 1e-14);
    }

    #[test]
    fn strang_step_is_reversible() {
        let m = coupled();
        let u = draw(&m, 2);
        let back = strang_step(&m, &strang_step(&m, &u, 0.01), -0.01);
        let scale = phase_norm(m.grid(), &u, SobolevWeight::inhomogeneous(0.0));
        assert!(dist(&m, &back, &u) < 1e-12 * scale);
    }

    #[test]
    fn interaction_step_leading_term() {
        let m = coupled();
        let u = draw(&m, 3);
        let g = m.nonlinearity_g(&u);
        let scale = phase_norm(m.grid(), &g, SobolevWeight::inhomogeneous(0.0));
        let mut errs = Vec::new();
        for dt in [1e-2, 5e-3] {
            let mut lin = u.clone();
            lin.axpy(dt, &g);
            errs.push(dist(&m, &rk4_interaction_step(&m, 0.0, &u, dt), &lin) / scale);
        }
        assert!((errs[0] / errs[1] - 4.0).abs() < 0.3, "{errs:?}");
    }

    #[test]
    fn zero_vartheta_leaves_state_unchanged() {
        let m = decoupled();
        let mut u = draw(&m, 4);
        u.particles.p.iter_mut().for_each(|x| *x = 0.0);
        assert_eq!(rk4_interaction_step(&m, 0.3, &u, 0.1), u);
    }

    #[test]
    fn zero_time_gives_single_sample() {
        let m = coupled();
        let u = draw(&m, 5);
        let traj = evolve(&m, &u, 0.0, 0.1, Scheme::Strang, EvolveOptions::default()).unwrap();
        assert_eq!(traj.samples.len(), 1);
        assert_eq!(traj.final_state, u);
    }

    #[test]
    fn decoupled_evolution_is_explicit() {
        let m = decoupled();
        let u = draw(&m, 6);
        for scheme in [Scheme::Strang, Scheme::InteractionRk4] {
            let traj = evolve(&m, &u, 0.5, 0.05, scheme, EvolveOptions::default()).unwrap();
            let exact = free_flow(m.grid(), &u, 0.5, m.spec());
            assert!(dist(&m, &traj.final_state, &exact) < 1e-13);
        }
    }

    #[test]
    fn schemes_agree() {
        let m = coupled();
        let u = draw(&m, 7);
        let a = evolve_endpoint(&m, &u, 0.5, 0.01, Scheme::Strang).unwrap();
        let b = evolve_endpoint(&m, &u, 0.5, 0.01, Scheme::InteractionRk4).unwrap();
        let coarse = dist(&m, &a, &b);
        let a2 = evolve_endpoint(&m, &u, 0.5, 0.005, Scheme::Strang).unwrap();
        let fine = dist(&m, &a2, &b);
        assert!((coarse / fine - 4.0).abs() < 0.5, "{coarse} {fine}");
    }

    #[test]
    fn step_count_validation() {
        assert_eq!(step_count(1.0, 0.1).unwrap(), 10);
        assert_eq!(step_count(-1.0, -0.25).unwrap(), 4);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(1.0, -0.1).is_err());
        assert!(step_count(1.0, 0.0).is_err());
    }

    #[test]
    fn non_finite_state_aborts() {
        let m = coupled();
        let mut u = draw(&m, 8);
        u.particles.p[0] = f64::INFINITY;
        match evolve(&m, &u, 0.1, 0.05, Scheme::Strang, EvolveOptions::default()) {
            Err(Error::NonFinite { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn decoupled_divergence_is_explicit() {
        let m = decoupled();
        let u = draw(&m, 9);
        let mut dir = m.zero_state();
        dir.particles.p[0] = 1.0;
        let rep = divergence_report(&m, &u, 1e-6, &dir, 1.0, 0.1, Scheme::Strang, 1).unwrap();
        assert!((rep.distances[0] - 1e-6).abs() < 1e-14);
        for (t, d) in rep.times.iter().zip(&rep.distances) {
            // |(1, t/m)| * eps with m = 2.
            let expected = 1e-6 * (1.0 + (t / 2.0).powi(2)).sqrt();
            assert!((d - expected).abs() < 1e-12, "{t} {d} {expected}");
            assert!(*d <= (1.0 + t / 2.0) * 1e-6 * (1.0 + 1e-9));
        }
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = coupled();
        let u = draw(&m, 10);
        let traj = evolve(&m, &u, 0.2, 0.1, Scheme::Strang, EvolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("t,H,norm_X0,norm_X12,norm_X1,p_0_0"));
        assert_eq!(lines[1].split(',').count(), 5 + 12);
    }
}
