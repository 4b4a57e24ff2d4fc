//! Probability measures on phase space as equal-weight sample ensembles.
//!
//! Sample `m` of a measure drawn with seed `s` comes from its own ChaCha8
//! stream `(s, m)`, so ensembles do not depend on the order or the number of
//! workers that generate them. Every reduction runs in sample order with
//! compensated summation.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::draws::normal;
use crate::error::{Error, Result};
use crate::geometry::KGrid;
use crate::integrator::{evolve, EvolveOptions, Scheme, Trajectory};
use crate::interaction::Model;
use crate::state::{field_norm_sqr, real_inner_unchecked, PhaseSpacePoint, SobolevWeight};
use crate::summation::{ComplexSum, NeumaierSum};

use std::f64::consts::PI;

/// A perturbed field mode of a Gaussian measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMode {
    pub node: usize,
    pub polarization: usize,
    /// `E |alpha - alpha_center|^2` at this mode.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    Dirac {
        center: PhaseSpacePoint,
    },
    /// Independent `N(0, particle_scale^2)` on every particle coordinate and
    /// circular complex normals on the listed field modes.
    Gaussian {
        center: PhaseSpacePoint,
        particle_scale: f64,
        modes: Vec<FieldMode>,
    },
    Mixture(Vec<(f64, MeasureSpec)>),
}

impl MeasureSpec {
    pub fn validate(&self, grid: &KGrid) -> Result<()> {
        match self {
            MeasureSpec::Dirac { center } => center.field.check_grid(grid),
            MeasureSpec::Gaussian {
                center,
                particle_scale,
                modes,
            } => {
                center.field.check_grid(grid)?;
                if !(particle_scale.is_finite() && *particle_scale >= 0.0) {
                    return Err(Error::InvalidMeasure(format!(
                        "particle scale must be non-negative, got {particle_scale}"
                    )));
                }
                for mode in modes {
                    if mode.node >= grid.len() || mode.polarization >= grid.polarizations() {
                        return Err(Error::InvalidMeasure(format!(
                            "mode ({}, {}) outside the grid",
                            mode.node, mode.polarization
                        )));
                    }
                    if !(mode.variance.is_finite() && mode.variance >= 0.0) {
                        return Err(Error::InvalidMeasure(format!(
                            "mode variance must be non-negative, got {}",
                            mode.variance
                        )));
                    }
                }
                Ok(())
            }
            MeasureSpec::Mixture(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidMeasure("empty mixture".into()));
                }
                if parts.iter().any(|(w, _)| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::InvalidMeasure("mixture weights must be positive".into()));
                }
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidMeasure(format!(
                        "mixture weights sum to {total}, expected 1"
                    )));
                }
                let count = parts[0].1.particle_count();
                for (_, part) in parts {
                    part.validate(grid)?;
                    if part.particle_count() != count {
                        return Err(Error::InvalidMeasure(
                            "mixture components disagree on the particle count".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn particle_count(&self) -> usize {
        match self {
            MeasureSpec::Dirac { center } | MeasureSpec::Gaussian { center, .. } => center.count(),
            MeasureSpec::Mixture(parts) => parts.first().map_or(0, |(_, p)| p.particle_count()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MeasureSpec::Dirac { .. } => "dirac",
            MeasureSpec::Gaussian { .. } => "gaussian",
            MeasureSpec::Mixture(_) => "mixture",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub samples: Vec<PhaseSpacePoint>,
    pub seed: u64,
    /// Time of the samples relative to the initial measure.
    pub time: f64,
    pub trajectories: Option<Vec<Trajectory>>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// One CSV row per (sample, stored time).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let trajectories = self.trajectories.as_ref().ok_or(Error::MissingTrajectories)?;
        let Some(first) = trajectories.first().and_then(|t| t.samples.first()) else {
            return Ok(());
        };
        let (n, d) = (first.particles.count(), first.particles.dim());
        let mut header = vec!["sample", "t", "H", "norm_X0", "norm_X12", "norm_X1"]
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
        for (m, traj) in trajectories.iter().enumerate() {
            for s in &traj.samples {
                write!(w, "{m},")?;
                crate::integrator::write_row(&mut w, s)?;
            }
        }
        Ok(())
    }
}

/// Seed of mixture component `c` derived from the ensemble seed.
pub fn component_seed(seed: u64, component: usize) -> u64 {
    // SplitMix64 finalizer over the pair.
    let mut z = seed ^ (component as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splits `total` samples across weights by largest remainder; ties go to
/// the earlier component.
pub fn stratify(total: usize, weights: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[c] += 1;
        left -= 1;
    }
    counts
}

fn draw_one(spec: &MeasureSpec, rng: &mut ChaCha8Rng) -> PhaseSpacePoint {
    match spec {
        MeasureSpec::Dirac { center } => center.clone(),
        MeasureSpec::Gaussian {
            center,
            particle_scale,
            modes,
        } => {
            let mut u = center.clone();
            for x in u.particles.p.iter_mut().chain(u.particles.q.iter_mut()) {
                *x += particle_scale * normal(rng);
            }
            let m = u.field.polarizations();
            for mode in modes {
                let s = (0.5 * mode.variance).sqrt();
                let z = Complex64::new(s * normal(rng), s * normal(rng));
                u.field.values[mode.node * m + mode.polarization] += z;
            }
            u
        }
        MeasureSpec::Mixture(_) => unreachable!("mixtures are stratified before drawing"),
    }
}

fn sample_into(spec: &MeasureSpec, count: usize, seed: u64, out: &mut Vec<PhaseSpacePoint>) {
    match spec {
        MeasureSpec::Mixture(parts) => {
            let weights: Vec<f64> = parts.iter().map(|(w, _)| *w).collect();
            for (c, (&k, (_, part))) in stratify(count, &weights).iter().zip(parts).enumerate() {
                sample_into(part, k, component_seed(seed, c), out);
            }
        }
        leaf => {
            let start = out.len();
            out.extend((0..count).into_par_iter().map(|m| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(m as u64);
                draw_one(leaf, &mut rng)
            }).collect::<Vec<_>>());
            debug_assert_eq!(out.len() - start, count);
        }
    }
}

/// Draws `count` samples. Mixture components receive stratified counts and
/// seeds from [`component_seed`], in component order.
pub fn sample_measure(spec: &MeasureSpec, count: usize, seed: u64, grid: &KGrid) -> Result<Ensemble> {
    if count == 0 {
        return Err(Error::InvalidMeasure("ensemble size must be at least 1".into()));
    }
    spec.validate(grid)?;
    let mut samples = Vec::with_capacity(count);
    sample_into(spec, count, seed, &mut samples);
    Ok(Ensemble {
        samples,
        seed,
        time: 0.0,
        trajectories: None,
    })
}

/// Evolves every sample to `t_end`. Trajectories are retained when
/// `keep` is given. On failure the lowest failing sample index is reported.
pub fn push_forward(
    model: &Model,
    ensemble: &Ensemble,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
    keep: Option<EvolveOptions>,
) -> Result<Ensemble> {
    let options = keep.unwrap_or(EvolveOptions {
        sample_every: usize::MAX,
        keep_states: false,
    });
    let results: Vec<Result<Trajectory>> = ensemble
        .samples
        .par_iter()
        .map(|u| evolve(model, u, t_end, dt, scheme, options))
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut trajectories = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        let traj = r.map_err(|e| Error::Sample {
            index,
            source: Box::new(e),
        })?;
        samples.push(traj.final_state.clone());
        if keep.is_some() {
            trajectories.push(traj);
        }
    }
    Ok(Ensemble {
        samples,
        seed: ensemble.seed,
        time: ensemble.time + t_end,
        trajectories: keep.map(|_| trajectories),
    })
}

/// Monte-Carlo mean of a complex per-sample quantity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn from_values(values: &[Complex64]) -> Self {
        let m = values.len();
        let mut acc = ComplexSum::new();
        values.iter().for_each(|&z| acc.add(z));
        let mean = acc.total() / m as f64;
        let stderr = if m > 1 {
            let var: f64 = values
                .iter()
                .map(|z| (z - mean).norm_sqr())
                .collect::<NeumaierSum>()
                .total()
                / (m - 1) as f64;
            (var / m as f64).sqrt()
        } else {
            0.0
        };
        Self {
            re: mean.re,
            im: mean.im,
            stderr,
        }
    }
}

/// `(1/M) sum_m exp(2 pi i Re<y, u_m>_{X^sigma})`.
pub fn characteristic_function(grid: &KGrid, samples: &[PhaseSpacePoint], y: &PhaseSpacePoint, sigma: f64) -> Result<Estimate> {
    if samples.is_empty() {
        return Err(Error::InvalidMeasure("empty ensemble".into()));
    }
    for u in samples {
        y.check_compatible(u)?;
    }
    y.field.check_grid(grid)?;
    let weight = SobolevWeight::inhomogeneous(sigma);
    let values: Vec<Complex64> = samples
        .iter()
        .map(|u| Complex64::from_polar(1.0, 2.0 * PI * real_inner_unchecked(grid, y, u, weight)))
        .collect();
    Ok(Estimate::from_values(&values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicResidual {
    pub t0: f64,
    pub t: f64,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub residual: f64,
    /// Standard error of the per-sample residual mean.
    pub mc_stderr: f64,
}

/// Residual of the characteristic equation between `t0` and `t` along the
/// retained trajectories, in interaction-picture variables
/// `u~(s) = Phi^0_{-s} u(s)`. The time integral uses the trapezoid rule on
/// the stored samples.
pub fn characteristic_residual(
    model: &Model,
    ensemble: &Ensemble,
    y: &PhaseSpacePoint,
    t0: f64,
    t: f64,
    sigma: f64,
) -> Result<CharacteristicResidual> {
    let trajectories = ensemble.trajectories.as_ref().ok_or(Error::MissingTrajectories)?;
    if trajectories.is_empty() {
        return Err(Error::MissingTrajectories);
    }
    let grid = model.grid();
    let weight = SobolevWeight::inhomogeneous(sigma);
    let (lo, hi) = if t0 <= t { (t0, t) } else { (t, t0) };
    let tol = 1e-9 * (1.0 + hi.abs());

    let per_sample: Vec<Result<(Complex64, Complex64, Complex64)>> = trajectories
        .par_iter()
        .map(|traj| {
            let window: Vec<_> = traj
                .samples
                .iter()
                .filter(|s| s.t >= lo - tol && s.t <= hi + tol)
                .collect();
            let first = window.first().ok_or(Error::MissingTrajectories)?;
            let last = window.last().ok_or(Error::MissingTrajectories)?;
            if (first.t - lo).abs() > tol || (last.t - hi).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "trajectory samples do not cover [{lo}, {hi}]"
                )));
            }
            let mut phase_at = Vec::with_capacity(window.len());
            let mut integrand = Vec::with_capacity(window.len());
            for s in &window {
                let u = s.state.as_ref().ok_or(Error::MissingTrajectories)?;
                y.check_compatible(u)?;
                let tilde = model.free_flow(-s.t).applied(u);
                let e = Complex64::from_polar(1.0, 2.0 * PI * real_inner_unchecked(grid, y, &tilde, weight));
                let theta = model.vartheta(s.t, &tilde);
                phase_at.push(e);
                integrand.push(e * real_inner_unchecked(grid, &theta, y, weight));
            }
            let mut integral = ComplexSum::new();
            for k in 1..window.len() {
                let h = window[k].t - window[k - 1].t;
                integral.add((integrand[k] + integrand[k - 1]) * (0.5 * h));
            }
            let mut integral = integral.total();
            let (start, end) = if t0 <= t {
                (phase_at[0], *phase_at.last().expect("non-empty"))
            } else {
                integral = -integral;
                (*phase_at.last().expect("non-empty"), phase_at[0])
            };
            let rhs = start + Complex64::new(0.0, 2.0 * PI) * integral;
            Ok((end, rhs, end - rhs))
        })
        .collect();

    let mut lhs_v = Vec::with_capacity(per_sample.len());
    let mut rhs_v = Vec::with_capacity(per_sample.len());
    let mut res_v = Vec::with_capacity(per_sample.len());
    for (index, r) in per_sample.into_iter().enumerate() {
        let (l, r, d) = r.map_err(|e| Error::Sample {
            index,
            source: Box::new(e),
        })?;
        lhs_v.push(l);
        rhs_v.push(r);
        res_v.push(d);
    }
    let lhs = Estimate::from_values(&lhs_v);
    let rhs = Estimate::from_values(&rhs_v);
    let diff = Estimate::from_values(&res_v);
    Ok(CharacteristicResidual {
        t0,
        t,
        lhs,
        rhs,
        residual: (lhs.value() - rhs.value()).norm(),
        mc_stderr: diff.stderr,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentRow {
    pub t: f64,
    /// Mean of `|p|^4`.
    pub p4: f64,
    /// Mean of `||alpha||^4` in the homogeneous `H^{1/2}` norm.
    pub field_h12_4: f64,
    /// Mean of `||alpha||^4_{L^2}`.
    pub field_l2_4: f64,
    pub bounded_stderr: f64,
    pub field_l2_4_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    /// Smallest constant bounding `p4 + field_h12_4` at every row.
    pub c1: f64,
    /// Smallest `c` with `field_l2_4 <= c e^{c |t|}` at every row.
    pub c2: f64,
    pub bounded_violations: usize,
    pub exponential_violations: usize,
}

/// Smallest `c >= 0` with `c e^{c t} >= v`, for `v >= 0`, `t >= 0`.
pub fn exponential_envelope_constant(v: f64, t: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let f = |c: f64| c * (c * t).exp() - v;
    let (mut lo, mut hi) = (0.0, v.max(1.0));
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Moments along retained trajectories at every stored time.
pub fn moment_report(grid: &KGrid, ensemble: &Ensemble) -> Result<MomentReport> {
    let trajectories = ensemble.trajectories.as_ref().ok_or(Error::MissingTrajectories)?;
    let first = trajectories.first().ok_or(Error::MissingTrajectories)?;
    let times = first.times();
    let h12 = SobolevWeight::homogeneous(0.5);
    let l2 = SobolevWeight::homogeneous(0.0);
    let mut rows = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let mut p4 = Vec::with_capacity(trajectories.len());
        let mut h4 = Vec::with_capacity(trajectories.len());
        let mut l4 = Vec::with_capacity(trajectories.len());
        for traj in trajectories {
            let s = traj.samples.get(k).ok_or(Error::MissingTrajectories)?;
            if (s.t - t).abs() > 1e-12 * (1.0 + t.abs()) {
                return Err(Error::InvalidArgument("trajectories sampled at different times".into()));
            }
            let u = s.state.as_ref().ok_or(Error::MissingTrajectories)?;
            let p2: f64 = u.particles.p.iter().map(|x| x * x).sum();
            p4.push(p2 * p2);
            h4.push(field_norm_sqr(grid, &u.field, h12).powi(2));
            l4.push(field_norm_sqr(grid, &u.field, l2).powi(2));
        }
        let bounded: Vec<Complex64> = p4
            .iter()
            .zip(&h4)
            .map(|(a, b)| Complex64::new(a + b, 0.0))
            .collect();
        let l2_vals: Vec<Complex64> = l4.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mean = |v: &[f64]| v.iter().copied().collect::<NeumaierSum>().total() / v.len() as f64;
        rows.push(MomentRow {
            t,
            p4: mean(&p4),
            field_h12_4: mean(&h4),
            field_l2_4: mean(&l4),
            bounded_stderr: Estimate::from_values(&bounded).stderr,
            field_l2_4_stderr: Estimate::from_values(&l2_vals).stderr,
        });
    }
    let c1 = rows.iter().fold(0.0f64, |c, r| c.max(r.p4 + r.field_h12_4));
    let c2 = rows
        .iter()
        .fold(0.0f64, |c, r| c.max(exponential_envelope_constant(r.field_l2_4, r.t.abs())));
    let slack = 1.0 + 1e-9;
    let bounded_violations = rows
        .iter()
        .filter(|r| r.p4 + r.field_h12_4 > c1 * slack)
        .count();
    let exponential_violations = rows
        .iter()
        .filter(|r| r.field_l2_4 > c2 * (c2 * r.t.abs()).exp() * slack)
        .count();
    Ok(MomentReport {
        rows,
        c1,
        c2,
        bounded_violations,
        exponential_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::{FormFactor, PotentialSpec};
    use crate::state::{real_inner, ParticleSpec};

    fn setup() -> (Model, PhaseSpacePoint) {
        let grid = KGrid::build(3, 2.0, 4).unwrap();
        let spec = ParticleSpec::new(vec![1.0], vec![FormFactor::gaussian(1.0)]).unwrap();
        let model = Model::new(grid, spec, PotentialSpec::Zero).unwrap();
        let mut u0 = model.zero_state();
        u0.particles.p = vec![0.3, -0.1, 0.2];
        u0.field.values[5] = Complex64::new(0.2, -0.1);
        (model, u0)
    }

    #[test]
    fn dirac_samples_are_copies() {
        let (model, u0) = setup();
        let e = sample_measure(&MeasureSpec::Dirac { center: u0.clone() }, 16, 1, model.grid()).unwrap();
        assert!(e.samples.iter().all(|u| *u == u0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let (model, u0) = setup();
        let spec = MeasureSpec::Gaussian {
            center: u0,
            particle_scale: 0.5,
            modes: vec![FieldMode { node: 3, polarization: 1, variance: 0.2 }],
        };
        let a = sample_measure(&spec, 32, 7, model.grid()).unwrap();
        let b = sample_measure(&spec, 32, 7, model.grid()).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = sample_measure(&spec, 32, 8, model.grid()).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn gaussian_mean_within_clt_envelope() {
        let (model, u0) = setup();
        let spec = MeasureSpec::Gaussian {
            center: u0.clone(),
            particle_scale: 0.5,
            modes: vec![],
        };
        let m = 400;
        let e = sample_measure(&spec, m, 11, model.grid()).unwrap();
        for c in 0..3 {
            let mean: f64 = e.samples.iter().map(|u| u.particles.p[c]).sum::<f64>() / m as f64;
            assert!((mean - u0.particles.p[c]).abs() < 3.0 * 0.5 / (m as f64).sqrt());
        }
    }

    #[test]
    fn characteristic_function_basics() {
        let (model, u0) = setup();
        let e = sample_measure(&MeasureSpec::Dirac { center: u0.clone() }, 4, 1, model.grid()).unwrap();
        let zero = model.zero_state();
        let cf = characteristic_function(model.grid(), &e.samples, &zero, 0.5).unwrap();
        assert_eq!(cf.value(), Complex64::new(1.0, 0.0));
        let mut y = model.zero_state();
        y.particles.q = vec![0.4, 0.0, -0.3];
        y.field.values[5] = Complex64::new(0.1, 0.3);
        let cf = characteristic_function(model.grid(), &e.samples, &y, 0.5).unwrap();
        let expected = Complex64::from_polar(1.0, 2.0 * PI * real_inner(model.grid(), &y, &u0, 0.5).unwrap());
        assert!((cf.value() - expected).norm() < 1e-14);
        assert!(cf.value().norm() <= 1.0 + 1e-15);
    }

    #[test]
    fn stratified_counts() {
        assert_eq!(stratify(10, &[0.5, 0.5]), vec![5, 5]);
        assert_eq!(stratify(10, &[0.25, 0.75]), vec![3, 7]);
        assert_eq!(stratify(3, &[1.0 / 3.0; 3]), vec![1, 1, 1]);
        assert_eq!(stratify(7, &[0.2, 0.3, 0.5]).iter().sum::<usize>(), 7);
    }

    #[test]
    fn mixture_is_linear() {
        let (model, u0) = setup();
        let g = MeasureSpec::Gaussian {
            center: u0.clone(),
            particle_scale: 0.3,
            modes: vec![FieldMode { node: 0, polarization: 0, variance: 0.1 }],
        };
        let d = MeasureSpec::Dirac { center: model.zero_state() };
        let mix = MeasureSpec::Mixture(vec![(0.25, g.clone()), (0.75, d.clone())]);
        let seed = 5;
        let e = sample_measure(&mix, 16, seed, model.grid()).unwrap();
        let e0 = sample_measure(&g, 4, component_seed(seed, 0), model.grid()).unwrap();
        let e1 = sample_measure(&d, 12, component_seed(seed, 1), model.grid()).unwrap();
        let mut y = model.zero_state();
        y.particles.p = vec![0.2, 0.1, 0.0];
        let cf = |s: &[PhaseSpacePoint]| characteristic_function(model.grid(), s, &y, 0.0).unwrap().value();
        let lin = cf(&e0.samples) * 0.25 + cf(&e1.samples) * 0.75;
        assert!((cf(&e.samples) - lin).norm() < 1e-14);
    }

    #[test]
    fn exponential_envelope_inverts() {
        for (v, t) in [(3.0, 2.0), (0.5, 0.0), (10.0, 5.0)] {
            let c = exponential_envelope_constant(v, t);
            assert!((c * (c * t).exp() - v).abs() < 1e-9 * v);
        }
    }
}
