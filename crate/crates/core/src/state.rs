//! Phase-space points `u = (p, q, alpha)`, their weighted norms, and the
//! exact free flow.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridParams, KGrid};
use crate::interaction::FormFactor;
use crate::summation::NeumaierSum;

/// Current version of the JSON state format.
pub const STATE_FORMAT_VERSION: u32 = 1;

/// Momenta and positions of `n` particles in `R^d`, stored flat (`[i * d + nu]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    d: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl ParticleState {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            d,
            p: vec![0.0; n * d],
            q: vec![0.0; n * d],
        }
    }

    pub fn new(d: usize, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if d == 0 || p.len() != q.len() || !p.len().is_multiple_of(d) {
            return Err(Error::InvalidState(format!(
                "particle arrays of lengths {} and {} do not split into d = {d} blocks",
                p.len(),
                q.len()
            )));
        }
        Ok(Self { d, p, q })
    }

    pub fn count(&self) -> usize {
        self.p.len() / self.d
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn p_of(&self, i: usize) -> &[f64] {
        &self.p[i * self.d..(i + 1) * self.d]
    }

    pub fn q_of(&self, i: usize) -> &[f64] {
        &self.q[i * self.d..(i + 1) * self.d]
    }

    /// `sum_i |p_i|^2 + |q_i|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.p.iter().chain(&self.q).map(|x| x * x).sum()
    }
}

/// Transverse field amplitudes `alpha_lambda(k_j)`, stored `[j * (d-1) + lambda]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    polarizations: usize,
    pub values: Vec<Complex64>,
}

impl FieldState {
    pub fn zeros(grid: &KGrid) -> Self {
        Self {
            polarizations: grid.polarizations(),
            values: vec![Complex64::new(0.0, 0.0); grid.len() * grid.polarizations()],
        }
    }

    pub fn new(grid: &KGrid, values: Vec<Complex64>) -> Result<Self> {
        let expected = grid.len() * grid.polarizations();
        if values.len() != expected {
            return Err(Error::GridMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            polarizations: grid.polarizations(),
            values,
        })
    }

    /// Field with `alpha_lambda(k) = f(j, lambda)`.
    pub fn from_fn<F>(grid: &KGrid, f: F) -> Self
    where
        F: Fn(usize, usize) -> Complex64,
    {
        let m = grid.polarizations();
        let values = (0..grid.len() * m).map(|idx| f(idx / m, idx % m)).collect();
        Self {
            polarizations: m,
            values,
        }
    }

    pub fn polarizations(&self) -> usize {
        self.polarizations
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.polarizations
    }

    #[inline]
    pub fn at(&self, j: usize, lambda: usize) -> Complex64 {
        self.values[j * self.polarizations + lambda]
    }

    #[inline]
    pub fn modes(&self, j: usize) -> &[Complex64] {
        &self.values[j * self.polarizations..(j + 1) * self.polarizations]
    }

    pub fn check_grid(&self, grid: &KGrid) -> Result<()> {
        let expected = grid.len() * grid.polarizations();
        if self.values.len() != expected || self.polarizations != grid.polarizations() {
            return Err(Error::GridMismatch {
                expected,
                found: self.values.len(),
            });
        }
        Ok(())
    }
}

/// A point of the phase space (or a tangent vector to it).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpacePoint {
    pub particles: ParticleState,
    pub field: FieldState,
}

impl PhaseSpacePoint {
    pub fn new(particles: ParticleState, field: FieldState) -> Self {
        Self { particles, field }
    }

    pub fn zeros(n: usize, grid: &KGrid) -> Self {
        Self {
            particles: ParticleState::zeros(n, grid.dim()),
            field: FieldState::zeros(grid),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            particles: ParticleState::zeros(self.particles.count(), self.particles.dim()),
            field: FieldState {
                polarizations: self.field.polarizations,
                values: vec![Complex64::new(0.0, 0.0); self.field.values.len()],
            },
        }
    }

    pub fn count(&self) -> usize {
        self.particles.count()
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &PhaseSpacePoint) {
        for (x, y) in self.particles.p.iter_mut().zip(&other.particles.p) {
            *x += a * y;
        }
        for (x, y) in self.particles.q.iter_mut().zip(&other.particles.q) {
            *x += a * y;
        }
        for (x, y) in self.field.values.iter_mut().zip(&other.field.values) {
            *x += y * a;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.particles.p.iter_mut().for_each(|x| *x *= a);
        self.particles.q.iter_mut().for_each(|x| *x *= a);
        self.field.values.iter_mut().for_each(|x| *x *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn sub(&self, other: &PhaseSpacePoint) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &PhaseSpacePoint) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.particles.p.iter().chain(&self.particles.q).all(|x| x.is_finite())
            && self
                .field
                .values
                .iter()
                .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn check_compatible(&self, other: &PhaseSpacePoint) -> Result<()> {
        if self.particles.p.len() != other.particles.p.len()
            || self.particles.dim() != other.particles.dim()
        {
            return Err(Error::InvalidState(format!(
                "particle blocks differ: {} vs {} coordinates",
                self.particles.p.len(),
                other.particles.p.len()
            )));
        }
        if self.field.values.len() != other.field.values.len() {
            return Err(Error::GridMismatch {
                expected: self.field.values.len(),
                found: other.field.values.len(),
            });
        }
        Ok(())
    }

    /// Serializes to the JSON state format, keyed to `grid`.
    pub fn to_json(&self, grid: &KGrid) -> StateFile {
        let d = self.particles.dim();
        StateFile {
            format_version: STATE_FORMAT_VERSION,
            grid: Some(*grid.params()),
            p: self.particles.p.chunks(d).map(<[f64]>::to_vec).collect(),
            q: self.particles.q.chunks(d).map(<[f64]>::to_vec).collect(),
            alpha_re: self.field.values.iter().map(|z| z.re).collect(),
            alpha_im: self.field.values.iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_json(file: &StateFile, grid: &KGrid) -> Result<Self> {
        if let Some(params) = &file.grid {
            if params != grid.params() {
                return Err(Error::InvalidState(format!(
                    "state was written for grid {params:?}, expected {:?}",
                    grid.params()
                )));
            }
        }
        let d = grid.dim();
        if file.p.len() != file.q.len() {
            return Err(Error::InvalidState(format!(
                "{} momenta but {} positions",
                file.p.len(),
                file.q.len()
            )));
        }
        if let Some(bad) = file.p.iter().chain(&file.q).find(|v| v.len() != d) {
            return Err(Error::InvalidState(format!(
                "particle vector of length {} in dimension {d}",
                bad.len()
            )));
        }
        if file.alpha_re.len() != file.alpha_im.len() {
            return Err(Error::InvalidState(
                "alpha_re and alpha_im differ in length".into(),
            ));
        }
        let particles = ParticleState::new(d, file.p.concat(), file.q.concat())?;
        let values = file
            .alpha_re
            .iter()
            .zip(&file.alpha_im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        let field = FieldState::new(grid, values)?;
        let u = Self { particles, field };
        if !u.is_finite() {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        Ok(u)
    }
}

/// On-disk layout of a [`PhaseSpacePoint`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridParams>,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub alpha_re: Vec<f64>,
    pub alpha_im: Vec<f64>,
}

fn default_format_version() -> u32 {
    STATE_FORMAT_VERSION
}

/// Masses and form factors of the particles.
#[derive(Debug, Clone)]
pub struct ParticleSpec {
    masses: Vec<f64>,
    form_factors: Vec<FormFactor>,
}

impl ParticleSpec {
    pub fn new(masses: Vec<f64>, form_factors: Vec<FormFactor>) -> Result<Self> {
        if masses.len() != form_factors.len() {
            return Err(Error::InvalidArgument(format!(
                "{} masses but {} form factors",
                masses.len(),
                form_factors.len()
            )));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "masses must be positive, got {m}"
            )));
        }
        Ok(Self {
            masses,
            form_factors,
        })
    }

    pub fn count(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn form_factor(&self, i: usize) -> &FormFactor {
        &self.form_factors[i]
    }

    pub fn form_factors(&self) -> &[FormFactor] {
        &self.form_factors
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SobolevFlavor {
    /// `|k|^{2 sigma}`
    Homogeneous,
    /// `(1 + |k|^2)^sigma`
    Inhomogeneous,
}

/// Field-block weight of the `X^sigma` norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevWeight {
    pub sigma: f64,
    pub flavor: SobolevFlavor,
}

impl SobolevWeight {
    pub fn new(sigma: f64, flavor: SobolevFlavor) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::InvalidArgument(format!(
                "Sobolev exponent must lie in [0, 1], got {sigma}"
            )));
        }
        Ok(Self { sigma, flavor })
    }

    pub fn homogeneous(sigma: f64) -> Self {
        Self {
            sigma,
            flavor: SobolevFlavor::Homogeneous,
        }
    }

    pub fn inhomogeneous(sigma: f64) -> Self {
        Self {
            sigma,
            flavor: SobolevFlavor::Inhomogeneous,
        }
    }

    #[inline]
    pub fn at(&self, k_norm: f64) -> f64 {
        if self.sigma == 0.0 {
            return 1.0;
        }
        match self.flavor {
            SobolevFlavor::Homogeneous => k_norm.powf(2.0 * self.sigma),
            SobolevFlavor::Inhomogeneous => (1.0 + k_norm * k_norm).powf(self.sigma),
        }
    }
}

/// `||alpha||^2` in the weighted space selected by `weight`.
pub fn field_norm_sqr(grid: &KGrid, alpha: &FieldState, weight: SobolevWeight) -> f64 {
    grid.integrate_real(|j| {
        let s: f64 = alpha.modes(j).iter().map(|z| z.norm_sqr()).sum();
        weight.at(grid.norm(j)) * s
    })
}

pub fn field_norm(grid: &KGrid, alpha: &FieldState, weight: SobolevWeight) -> f64 {
    field_norm_sqr(grid, alpha, weight).sqrt()
}

/// `||u||` in `X^sigma` (inhomogeneous) or its homogeneous counterpart.
pub fn phase_norm(grid: &KGrid, u: &PhaseSpacePoint, weight: SobolevWeight) -> f64 {
    (u.particles.norm_sqr() + field_norm_sqr(grid, &u.field, weight)).sqrt()
}

/// `Re <a, b>_{X^sigma}` with `z = q + i p` on the particle block and the
/// weight `(1 + |k|^2)^sigma` on the field block.
pub fn real_inner(grid: &KGrid, a: &PhaseSpacePoint, b: &PhaseSpacePoint, sigma: f64) -> Result<f64> {
    a.check_compatible(b)?;
    a.field.check_grid(grid)?;
    Ok(real_inner_unchecked(grid, a, b, SobolevWeight::inhomogeneous(sigma)))
}

pub(crate) fn real_inner_unchecked(
    grid: &KGrid,
    a: &PhaseSpacePoint,
    b: &PhaseSpacePoint,
    weight: SobolevWeight,
) -> f64 {
    let mut acc = NeumaierSum::new();
    let pa = &a.particles;
    let pb = &b.particles;
    for (x, y) in pa.q.iter().zip(&pb.q).chain(pa.p.iter().zip(&pb.p)) {
        acc.add(x * y);
    }
    acc.add(grid.integrate_real(|j| {
        let s: f64 = a
            .field
            .modes(j)
            .iter()
            .zip(b.field.modes(j))
            .map(|(x, y)| (x.conj() * y).re)
            .sum();
        weight.at(grid.norm(j)) * s
    }));
    acc.total()
}

/// The free flow at a fixed time: `q_i += t p_i / m_i`, `alpha *= e^{-i t |k|}`.
///
/// Phases are computed once, so repeated application is cheap.
#[derive(Debug, Clone)]
pub struct FreeFlow {
    t: f64,
    inv_masses: Vec<f64>,
    phases: Vec<Complex64>,
}

impl FreeFlow {
    pub fn new(grid: &KGrid, masses: &[f64], t: f64) -> Self {
        Self {
            t,
            inv_masses: masses.iter().map(|m| 1.0 / m).collect(),
            phases: grid
                .norms()
                .iter()
                .map(|&r| Complex64::from_polar(1.0, -t * r))
                .collect(),
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn apply(&self, u: &mut PhaseSpacePoint) {
        let d = u.particles.dim();
        let ParticleState { p, q, .. } = &mut u.particles;
        for (i, inv_m) in self.inv_masses.iter().enumerate() {
            for nu in 0..d {
                q[i * d + nu] += self.t * p[i * d + nu] * inv_m;
            }
        }
        let m = u.field.polarizations;
        for (chunk, phase) in u.field.values.chunks_exact_mut(m).zip(&self.phases) {
            for z in chunk {
                *z *= phase;
            }
        }
    }

    pub fn applied(&self, u: &PhaseSpacePoint) -> PhaseSpacePoint {
        let mut out = u.clone();
        self.apply(&mut out);
        out
    }
}

/// `Phi^0_t(u)`.
pub fn free_flow(grid: &KGrid, u: &PhaseSpacePoint, t: f64, spec: &ParticleSpec) -> PhaseSpacePoint {
    FreeFlow::new(grid, spec.masses(), t).applied(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::FormFactor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_point(grid: &KGrid, n: usize, rng: &mut ChaCha8Rng) -> PhaseSpacePoint {
        let d = grid.dim();
        let mut r = || rng.random_range(-1.0..1.0);
        let p = (0..n * d).map(|_| r()).collect();
        let q = (0..n * d).map(|_| r()).collect();
        let values = (0..grid.len() * (d - 1))
            .map(|_| Complex64::new(r(), r()))
            .collect();
        PhaseSpacePoint::new(
            ParticleState::new(d, p, q).unwrap(),
            FieldState::new(grid, values).unwrap(),
        )
    }

    fn spec(masses: &[f64]) -> ParticleSpec {
        ParticleSpec::new(
            masses.to_vec(),
            masses.iter().map(|_| FormFactor::gaussian(1.0)).collect(),
        )
        .unwrap()
    }

    fn gaussian_field(grid: &KGrid) -> FieldState {
        FieldState::from_fn(grid, |j, l| {
            if l == 0 {
                Complex64::new((-grid.norm(j).powi(2)).exp(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn norms_of_zero_vanish() {
        let grid = KGrid::build(3, 2.0, 4).unwrap();
        let u = PhaseSpacePoint::zeros(2, &grid);
        assert_eq!(phase_norm(&grid, &u, SobolevWeight::inhomogeneous(1.0)), 0.0);
        assert_eq!(field_norm(&grid, &u.field, SobolevWeight::homogeneous(0.5)), 0.0);
    }

    #[test]
    fn particle_only_norm() {
        let grid = KGrid::build(3, 2.0, 4).unwrap();
        let mut u = PhaseSpacePoint::zeros(1, &grid);
        u.particles.p[0] = 1.0;
        assert_eq!(phase_norm(&grid, &u, SobolevWeight::inhomogeneous(0.5)), 1.0);
    }

    #[test]
    fn gaussian_field_norms_match_radial_oracles() {
        let params = crate::geometry::GridParams::uniform(3, 6.0, 48)
            .with_rule(crate::geometry::QuadratureRule::Gauss2, 8);
        let grid = KGrid::with_params(params).unwrap();
        let alpha = gaussian_field(&grid);
        // 4 pi int r^3 e^{-2r^2} dr = pi / 2
        let half = field_norm_sqr(&grid, &alpha, SobolevWeight::homogeneous(0.5));
        assert!((half - PI / 2.0).abs() < 1e-3, "{half}");
        // 4 pi int r^2 e^{-2r^2} dr = (pi/2)^{3/2}
        let l2 = field_norm_sqr(&grid, &alpha, SobolevWeight::homogeneous(0.0));
        assert!((l2 - (PI / 2.0).powf(1.5)).abs() < 1e-3, "{l2}");

        let mut u = PhaseSpacePoint::zeros(1, &grid);
        u.field = alpha;
        u.particles.p[0] = 1.0;
        let mixed = phase_norm(&grid, &u, SobolevWeight::homogeneous(0.5));
        assert!((mixed - (1.0 + half).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn real_inner_reproduces_norm_and_cauchy_schwarz() {
        let grid = KGrid::build(3, 2.0, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = random_point(&grid, 2, &mut rng);
            let b = random_point(&grid, 2, &mut rng);
            let sigma = rng.random_range(0.0..=1.0);
            let aa = real_inner(&grid, &a, &a, sigma).unwrap();
            let na = phase_norm(&grid, &a, SobolevWeight::inhomogeneous(sigma));
            assert!((aa - na * na).abs() <= 1e-12 * aa);
            let ab = real_inner(&grid, &a, &b, sigma).unwrap();
            let ba = real_inner(&grid, &b, &a, sigma).unwrap();
            assert!((ab - ba).abs() <= 1e-12 * aa.max(1.0));
            let nb = phase_norm(&grid, &b, SobolevWeight::inhomogeneous(sigma));
            assert!(ab.abs() <= na * nb * (1.0 + 1e-12));
        }
    }

    #[test]
    fn real_inner_of_orthogonal_directions() {
        let grid = KGrid::build(3, 2.0, 4).unwrap();
        let mut a = PhaseSpacePoint::zeros(1, &grid);
        let mut b = PhaseSpacePoint::zeros(1, &grid);
        a.particles.p[0] = 1.0;
        b.particles.q[0] = 1.0;
        assert_eq!(real_inner(&grid, &a, &b, 0.5).unwrap(), 0.0);
        a.field.values[3] = Complex64::new(1.0, 0.0);
        b.field.values[3] = Complex64::new(0.0, 1.0);
        assert_eq!(real_inner(&grid, &a, &b, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn real_inner_rejects_mismatched_grids() {
        let small = KGrid::build(3, 2.0, 4).unwrap();
        let large = KGrid::build(3, 2.0, 6).unwrap();
        let a = PhaseSpacePoint::zeros(1, &small);
        let b = PhaseSpacePoint::zeros(1, &large);
        assert!(real_inner(&small, &a, &b, 0.0).is_err());
    }

    #[test]
    fn free_flow_moves_particles_ballistically() {
        let grid = KGrid::build(3, 2.0, 4).unwrap();
        let mut u = PhaseSpacePoint::zeros(1, &grid);
        u.particles.p[0] = 2.0;
        let moved = free_flow(&grid, &u, 3.0, &spec(&[2.0]));
        assert_eq!(moved.particles.q, vec![3.0, 0.0, 0.0]);
        assert_eq!(free_flow(&grid, &u, 0.0, &spec(&[2.0])), u);
    }

    #[test]
    fn free_flow_group_law_and_unitarity() {
        let grid = KGrid::build(3, 3.0, 6).unwrap();
        let sp = spec(&[1.0, 2.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u = random_point(&grid, 2, &mut rng);
            let s = rng.random_range(-5.0..5.0);
            let t = rng.random_range(-5.0..5.0);
            let two_step = free_flow(&grid, &free_flow(&grid, &u, s, &sp), t, &sp);
            let one_step = free_flow(&grid, &u, s + t, &sp);
            let w = SobolevWeight::inhomogeneous(1.0);
            let scale = phase_norm(&grid, &u, w).max(1.0);
            assert!(phase_norm(&grid, &two_step.sub(&one_step), w) <= 1e-12 * scale * (1.0 + s.abs() + t.abs()));
            let back = free_flow(&grid, &free_flow(&grid, &u, t, &sp), -t, &sp);
            assert!(phase_norm(&grid, &back.sub(&u), w) <= 1e-13 * scale * (1.0 + t.abs()));
            for weight in [SobolevWeight::homogeneous(0.5), SobolevWeight::inhomogeneous(1.0)] {
                let before = field_norm(&grid, &u.field, weight);
                let after = field_norm(&grid, &one_step.field, weight);
                assert!((before - after).abs() <= 1e-13 * before);
            }
        }
    }

    #[test]
    fn inhomogeneous_norm_is_monotone_in_sigma() {
        let grid = KGrid::build(3, 3.0, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_point(&grid, 1, &mut rng);
        let mut prev = 0.0;
        for step in 0..=10 {
            let sigma = step as f64 / 10.0;
            let n = field_norm(&grid, &u.field, SobolevWeight::inhomogeneous(sigma));
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn json_state_round_trip_and_validation() {
        let grid = KGrid::build(3, 2.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_point(&grid, 2, &mut rng);
        let text = serde_json::to_string(&u.to_json(&grid)).unwrap();
        let file: StateFile = serde_json::from_str(&text).unwrap();
        assert_eq!(PhaseSpacePoint::from_json(&file, &grid).unwrap(), u);

        let other = KGrid::build(3, 2.0, 6).unwrap();
        assert!(PhaseSpacePoint::from_json(&file, &other).is_err());
        let mut truncated = file.clone();
        truncated.grid = None;
        truncated.alpha_re.pop();
        truncated.alpha_im.pop();
        assert!(PhaseSpacePoint::from_json(&truncated, &grid).is_err());
    }

    #[test]
    fn sobolev_exponent_range_is_enforced() {
        assert!(SobolevWeight::new(1.5, SobolevFlavor::Homogeneous).is_err());
        assert!(SobolevWeight::new(0.5, SobolevFlavor::Inhomogeneous).is_ok());
    }
}
