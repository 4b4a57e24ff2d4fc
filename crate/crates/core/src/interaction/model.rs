//! The coupled particle-field model on a fixed grid.
//!
//! Every field integral is a sum over grid nodes in node order. The
//! combinations `z + conj(z)` appearing in the vector potential are formed as
//! `2 Re z`, so all returned quantities are exactly real.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{KGrid, PolarizationBasis};
use crate::state::{
    field_norm_sqr, FieldState, FreeFlow, ParticleSpec, ParticleState, PhaseSpacePoint,
    SobolevWeight,
};

use super::hypotheses::{check_hypotheses, weighted_norm, HypothesisReport, WeightedNorm};
use super::potential::{
    cos_product, cos_product_gradient_bound, coulomb_kernel, PotentialSpec, TWO_PI,
};

/// Vector potential of one particle together with its spatial Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPotentialJet {
    /// `A^nu`
    pub value: Vec<f64>,
    /// `d_mu A^nu`, stored `[nu * d + mu]`.
    pub jacobian: Vec<f64>,
}

impl VectorPotentialJet {
    /// `grad_q A^nu`.
    pub fn gradient(&self, nu: usize) -> &[f64] {
        let d = self.value.len();
        &self.jacobian[nu * d..(nu + 1) * d]
    }
}

/// Grid-consistent `L^2` norms of one form factor, the inputs of the
/// Cauchy-Schwarz constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingNorms {
    pub inverse_k: f64,
    pub inverse_sqrt_k: f64,
    pub sqrt_k: f64,
    pub plain: f64,
}

#[derive(Debug, Clone)]
struct PairKernel {
    i: usize,
    j: usize,
    /// `w_n g chi_i chi_j / |k_n|^2`
    weighted: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Model {
    grid: KGrid,
    basis: PolarizationBasis,
    spec: ParticleSpec,
    potential: PotentialSpec,
    /// `chi_i(k_j) / sqrt(2 |k_j|)`, stored `[i][j]`.
    coupling: Vec<Vec<f64>>,
    pairs: Vec<PairKernel>,
}

impl Model {
    pub fn new(grid: KGrid, spec: ParticleSpec, potential: PotentialSpec) -> Result<Self> {
        potential.validate(grid.dim())?;
        let basis = PolarizationBasis::new(&grid);
        let coupling: Vec<Vec<f64>> = spec
            .form_factors()
            .iter()
            .map(|chi| {
                grid.norms()
                    .iter()
                    .map(|&r| chi.eval(r) / (2.0 * r).sqrt())
                    .collect()
            })
            .collect();
        let mut pairs = Vec::new();
        if let PotentialSpec::SmearedCoulomb { g } = potential {
            let n = spec.count();
            for i in 0..n {
                for j in i + 1..n {
                    let (ci, cj) = (spec.form_factor(i), spec.form_factor(j));
                    let weighted = (0..grid.len())
                        .map(|k| {
                            let r = grid.norm(k);
                            grid.weight(k) * coulomb_kernel(g, ci.eval(r), cj.eval(r), r)
                        })
                        .collect();
                    pairs.push(PairKernel { i, j, weighted });
                }
            }
        }
        Ok(Self {
            grid,
            basis,
            spec,
            potential,
            coupling,
            pairs,
        })
    }

    /// Same model with a different polarization frame on every node.
    pub fn with_basis(mut self, basis: PolarizationBasis) -> Result<Self> {
        if basis.len() != self.grid.len() || basis.dim() != self.grid.dim() {
            return Err(Error::GridMismatch {
                expected: self.grid.len(),
                found: basis.len(),
            });
        }
        self.basis = basis;
        Ok(self)
    }

    pub fn grid(&self) -> &KGrid {
        &self.grid
    }

    pub fn basis(&self) -> &PolarizationBasis {
        &self.basis
    }

    pub fn spec(&self) -> &ParticleSpec {
        &self.spec
    }

    pub fn potential_spec(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn particles(&self) -> usize {
        self.spec.count()
    }

    pub fn free_flow(&self, t: f64) -> FreeFlow {
        FreeFlow::new(&self.grid, self.spec.masses(), t)
    }

    pub fn check_hypotheses(&self, sigma: f64) -> Result<HypothesisReport> {
        check_hypotheses(&self.spec, sigma, &self.grid)
    }

    /// Checks that `u` lives on this model's grid with the right particle count.
    pub fn check_state(&self, u: &PhaseSpacePoint) -> Result<()> {
        u.field.check_grid(&self.grid)?;
        if u.particles.dim() != self.dim() || u.count() != self.particles() {
            return Err(Error::InvalidState(format!(
                "state has {} particles in dimension {}, model has {} in dimension {}",
                u.count(),
                u.particles.dim(),
                self.particles(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn zero_state(&self) -> PhaseSpacePoint {
        PhaseSpacePoint::zeros(self.particles(), &self.grid)
    }

    pub fn coupling_norms(&self, i: usize) -> CouplingNorms {
        let chi = self.spec.form_factor(i);
        let g = &self.grid;
        CouplingNorms {
            inverse_k: weighted_norm(g, chi, WeightedNorm::InverseK, 1.0),
            inverse_sqrt_k: weighted_norm(g, chi, WeightedNorm::InverseSqrtK, 1.0),
            sqrt_k: weighted_norm(g, chi, WeightedNorm::SqrtK, 1.0),
            plain: g.integrate_radial(|r| chi.eval(r).powi(2)).sqrt(),
        }
    }

    /// `|| |k|^{3/2 - sigma} chi_i ||` on the grid.
    pub fn sobolev_coupling_norm(&self, i: usize, sigma: f64) -> f64 {
        weighted_norm(&self.grid, self.spec.form_factor(i), WeightedNorm::Sobolev, sigma)
    }

    /// `e^{2 pi i k_j . q}` for every node.
    fn phases(&self, q: &[f64]) -> Vec<Complex64> {
        (0..self.grid.len())
            .map(|j| {
                let k = self.grid.node(j);
                let arg: f64 = k.iter().zip(q).map(|(a, b)| a * b).sum();
                let (s, c) = (TWO_PI * arg).sin_cos();
                Complex64::new(c, s)
            })
            .collect()
    }

    fn jet_with_phases(&self, i: usize, phases: &[Complex64], alpha: &FieldState) -> VectorPotentialJet {
        let d = self.dim();
        let m = d - 1;
        let coupling = &self.coupling[i];
        let mut value = vec![0.0; d];
        let mut jacobian = vec![0.0; d * d];
        let mut z = vec![Complex64::new(0.0, 0.0); d];
        for j in 0..self.grid.len() {
            let c = coupling[j];
            if c == 0.0 {
                continue;
            }
            let modes = alpha.modes(j);
            let frame = self.basis.frame(j);
            let scale = phases[j] * (c * self.grid.weight(j));
            for nu in 0..d {
                let mut s = Complex64::new(0.0, 0.0);
                for lambda in 0..m {
                    s += modes[lambda] * frame[lambda * d + nu];
                }
                z[nu] = scale * s;
            }
            let k = self.grid.node(j);
            for nu in 0..d {
                value[nu] += 2.0 * z[nu].re;
                let im = z[nu].im;
                for mu in 0..d {
                    jacobian[nu * d + mu] -= 2.0 * TWO_PI * k[mu] * im;
                }
            }
        }
        VectorPotentialJet { value, jacobian }
    }

    /// `A_i(q_i, alpha)` together with `d_mu A_i^nu`.
    pub fn vector_potential_jet(&self, i: usize, q_i: &[f64], alpha: &FieldState) -> VectorPotentialJet {
        self.jet_with_phases(i, &self.phases(q_i), alpha)
    }

    pub fn vector_potential(&self, i: usize, q_i: &[f64], alpha: &FieldState) -> Result<Vec<f64>> {
        alpha.check_grid(&self.grid)?;
        Ok(self.vector_potential_jet(i, q_i, alpha).value)
    }

    /// `grad_q A_i^nu(q_i, alpha)`.
    pub fn grad_vector_potential(
        &self,
        i: usize,
        nu: usize,
        q_i: &[f64],
        alpha: &FieldState,
    ) -> Result<Vec<f64>> {
        alpha.check_grid(&self.grid)?;
        Ok(self.vector_potential_jet(i, q_i, alpha).gradient(nu).to_vec())
    }

    /// Complex grid sums behind `A_i`, before the real part is taken. The
    /// imaginary part measures how far the quadrature is from exact realness.
    pub fn vector_potential_complex(&self, i: usize, q_i: &[f64], alpha: &FieldState) -> Vec<Complex64> {
        let d = self.dim();
        let phases = self.phases(q_i);
        let mut out = vec![Complex64::new(0.0, 0.0); d];
        for (j, &phase) in phases.iter().enumerate() {
            let c = self.coupling[i][j] * self.grid.weight(j);
            let frame = self.basis.frame(j);
            for (lambda, a) in alpha.modes(j).iter().enumerate() {
                let term = a * phase * c + (a * phase).conj() * c;
                for nu in 0..d {
                    out[nu] += term * frame[lambda * d + nu];
                }
            }
        }
        out
    }

    /// Pair function `w_ij(x)` and its gradient.
    pub fn smeared_coulomb(&self, i: usize, j: usize, x: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim();
        let (value, grad) = match &self.potential {
            PotentialSpec::SmearedCoulomb { .. } => {
                let kernel = self.pair_kernel(i, j);
                let mut value = 0.0;
                let mut grad = vec![0.0; d];
                for (n, &w) in kernel.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let k = self.grid.node(n);
                    let arg: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
                    let (s, c) = (TWO_PI * arg).sin_cos();
                    value += w * c;
                    for mu in 0..d {
                        grad[mu] -= TWO_PI * k[mu] * w * s;
                    }
                }
                (value, grad)
            }
            PotentialSpec::CosProduct {
                amplitude,
                wavevector,
            } => cos_product(*amplitude, wavevector, x),
            PotentialSpec::Zero => (0.0, vec![0.0; d]),
        };
        (value, grad)
    }

    /// `w_ij(x)` summed with the full complex exponential; the imaginary part
    /// vanishes only through the `k -> -k` symmetry of the grid.
    pub fn smeared_coulomb_complex(&self, i: usize, j: usize, x: &[f64]) -> Complex64 {
        if !matches!(self.potential, PotentialSpec::SmearedCoulomb { .. }) {
            return Complex64::new(self.smeared_coulomb(i, j, x).0, 0.0);
        }
        let kernel = self.pair_kernel(i, j);
        let mut acc = crate::summation::ComplexSum::new();
        for (n, &w) in kernel.iter().enumerate() {
            let k = self.grid.node(n);
            let arg: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
            acc.add(Complex64::from_polar(w, TWO_PI * arg));
        }
        acc.total()
    }

    fn pair_kernel(&self, i: usize, j: usize) -> &[f64] {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        &self
            .pairs
            .iter()
            .find(|p| p.i == a && p.j == b)
            .expect("pair kernels exist for every i < j")
            .weighted
    }

    /// `V(q)` and `grad V(q)` for flat positions `q`.
    ///
    /// `grad_{q_i} V = sum_{j != i} grad w_ij(q_i - q_j)`.
    pub fn potential(&self, q: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim();
        let n = q.len() / d;
        let mut value = 0.0;
        let mut grad = vec![0.0; q.len()];
        if matches!(self.potential, PotentialSpec::Zero) {
            return (value, grad);
        }
        let mut x = vec![0.0; d];
        for i in 0..n {
            for j in i + 1..n {
                for mu in 0..d {
                    x[mu] = q[i * d + mu] - q[j * d + mu];
                }
                let (w, gw) = self.smeared_coulomb(i, j, &x);
                value += w;
                for mu in 0..d {
                    grad[i * d + mu] += gw[mu];
                    grad[j * d + mu] -= gw[mu];
                }
            }
        }
        (value, grad)
    }

    /// Upper bound on `sup |grad_{q_i} V|` over all positions.
    pub fn potential_gradient_bound(&self, i: usize) -> f64 {
        let n = self.particles();
        match &self.potential {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::CosProduct {
                amplitude,
                wavevector,
            } => (n.saturating_sub(1)) as f64 * cos_product_gradient_bound(*amplitude, wavevector),
            PotentialSpec::SmearedCoulomb { .. } => (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    self.pair_kernel(i, j)
                        .iter()
                        .enumerate()
                        .map(|(k, w)| TWO_PI * self.grid.norm(k) * w.abs())
                        .sum::<f64>()
                })
                .sum(),
        }
    }

    /// Upper bound on `sup |V|`.
    pub fn potential_bound(&self) -> f64 {
        let n = self.particles();
        match &self.potential {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::CosProduct { amplitude, .. } => {
                (n * n.saturating_sub(1) / 2) as f64 * amplitude.abs()
            }
            PotentialSpec::SmearedCoulomb { .. } => self
                .pairs
                .iter()
                .map(|p| p.weighted.iter().map(|w| w.abs()).sum::<f64>())
                .sum(),
        }
    }

    fn jets(&self, u: &PhaseSpacePoint) -> (Vec<Vec<Complex64>>, Vec<VectorPotentialJet>) {
        let phases: Vec<Vec<Complex64>> = (0..self.particles())
            .map(|i| self.phases(u.particles.q_of(i)))
            .collect();
        let jets = phases
            .iter()
            .enumerate()
            .map(|(i, ph)| self.jet_with_phases(i, ph, &u.field))
            .collect();
        (phases, jets)
    }

    /// `sum_i |p_i - A_i|^2 / (2 m_i) + V(q) + || alpha ||^2_{H^{1/2}}`.
    pub fn hamiltonian(&self, u: &PhaseSpacePoint) -> f64 {
        let d = self.dim();
        let mut kinetic = 0.0;
        for i in 0..self.particles() {
            let a = self.vector_potential_jet(i, u.particles.q_of(i), &u.field).value;
            let p = u.particles.p_of(i);
            let s: f64 = (0..d).map(|nu| (p[nu] - a[nu]).powi(2)).sum();
            kinetic += s / (2.0 * self.spec.mass(i));
        }
        let (v, _) = self.potential(&u.particles.q);
        kinetic + v + field_norm_sqr(&self.grid, &u.field, SobolevWeight::homogeneous(0.5))
    }

    /// Shared body of `F` and `G`; `transport` selects `F_q = (p - A)/m`
    /// over `G_q = -A/m`.
    fn nonlinearity(&self, u: &PhaseSpacePoint, transport: bool) -> PhaseSpacePoint {
        let d = self.dim();
        let m = d - 1;
        let n = self.particles();
        let (phases, jets) = self.jets(u);
        let (_, grad_v) = self.potential(&u.particles.q);

        let mut p_out = vec![0.0; n * d];
        let mut q_out = vec![0.0; n * d];
        let mut mech = vec![0.0; n * d];
        for i in 0..n {
            let inv_m = 1.0 / self.spec.mass(i);
            let p = u.particles.p_of(i);
            let jet = &jets[i];
            for nu in 0..d {
                mech[i * d + nu] = p[nu] - jet.value[nu];
            }
            for mu in 0..d {
                let mut s = 0.0;
                for nu in 0..d {
                    s += mech[i * d + nu] * jet.jacobian[nu * d + mu];
                }
                p_out[i * d + mu] = inv_m * s - grad_v[i * d + mu];
                q_out[i * d + mu] = if transport {
                    inv_m * mech[i * d + mu]
                } else {
                    -inv_m * jet.value[mu]
                };
            }
        }

        let mut field = vec![Complex64::new(0.0, 0.0); self.grid.len() * m];
        for j in 0..self.grid.len() {
            let frame = self.basis.frame(j);
            for i in 0..n {
                let c = self.coupling[i][j];
                if c == 0.0 {
                    continue;
                }
                let pref = phases[i][j].conj() * Complex64::new(0.0, c / self.spec.mass(i));
                for lambda in 0..m {
                    let eps = &frame[lambda * d..(lambda + 1) * d];
                    let dot: f64 = (0..d).map(|nu| mech[i * d + nu] * eps[nu]).sum();
                    field[j * m + lambda] += pref * dot;
                }
            }
        }

        PhaseSpacePoint::new(
            ParticleState::new(d, p_out, q_out).expect("consistent lengths"),
            FieldState::new(&self.grid, field).expect("length matches grid"),
        )
    }

    pub fn nonlinearity_f(&self, u: &PhaseSpacePoint) -> PhaseSpacePoint {
        self.nonlinearity(u, true)
    }

    pub fn nonlinearity_g(&self, u: &PhaseSpacePoint) -> PhaseSpacePoint {
        self.nonlinearity(u, false)
    }

    /// `Phi^0_{-t} G Phi^0_t (u)`.
    pub fn vartheta(&self, t: f64, u: &PhaseSpacePoint) -> PhaseSpacePoint {
        let v = self.free_flow(t).applied(u);
        let mut g = self.nonlinearity_g(&v);
        self.free_flow(-t).apply(&mut g);
        g
    }

    /// Brackets `<alpha, F_i^nu(s)>`, `<F_i^nu(s), alpha_0>` and
    /// `<alpha, k_mu F_i^nu(s)>` for one particle.
    fn brackets(&self, s: f64, i: usize, u: &PhaseSpacePoint, alpha0: &FieldState) -> Brackets {
        let d = self.dim();
        let inv_m = 1.0 / self.spec.mass(i);
        let p = u.particles.p_of(i);
        let q = u.particles.q_of(i);
        let shifted: Vec<f64> = (0..d).map(|nu| q[nu] + s * p[nu] * inv_m).collect();
        let mut a = vec![Complex64::new(0.0, 0.0); d];
        let mut b = vec![Complex64::new(0.0, 0.0); d];
        let mut x = vec![Complex64::new(0.0, 0.0); d * d];
        for j in 0..self.grid.len() {
            let c = self.coupling[i][j];
            if c == 0.0 {
                continue;
            }
            let k = self.grid.node(j);
            let kq: f64 = k.iter().zip(&shifted).map(|(a, b)| a * b).sum();
            let f = Complex64::from_polar(c * self.grid.weight(j), -TWO_PI * kq + s * self.grid.norm(j));
            let frame = self.basis.frame(j);
            let alpha = u.field.modes(j);
            let alpha0 = alpha0.modes(j);
            for nu in 0..d {
                let mut sa = Complex64::new(0.0, 0.0);
                let mut sb = Complex64::new(0.0, 0.0);
                for lambda in 0..d - 1 {
                    let eps = frame[lambda * d + nu];
                    sa += alpha[lambda].conj() * eps;
                    sb += alpha0[lambda] * eps;
                }
                let fa = sa * f;
                a[nu] += fa;
                b[nu] += sb * f.conj();
                for mu in 0..d {
                    x[nu * d + mu] += fa * k[mu];
                }
            }
        }
        Brackets { a, b, x, shifted }
    }

    /// Characteristic density `m(s, xi)` at the point `u`.
    ///
    /// Satisfies `m(s, xi) = -2 pi Re <vartheta(s, u), xi~>` with
    /// `xi~ = (z_0 / (i pi), alpha_0 / (sqrt 2 pi))`.
    pub fn characteristic_density_m(&self, s: f64, xi: &PhaseSpacePoint, u: &PhaseSpacePoint) -> f64 {
        let d = self.dim();
        let n = self.particles();
        let mut shifted_q = vec![0.0; n * d];
        let mut particle_terms = 0.0;
        let mut per_particle = Vec::with_capacity(n);
        for i in 0..n {
            let br = self.brackets(s, i, u, &xi.field);
            shifted_q[i * d..(i + 1) * d].copy_from_slice(&br.shifted);
            per_particle.push(br);
        }
        let (_, grad_v) = self.potential(&shifted_q);
        for (i, br) in per_particle.iter().enumerate() {
            let inv_m = 1.0 / self.spec.mass(i);
            let p = u.particles.p_of(i);
            let p0 = xi.particles.p_of(i);
            let q0 = xi.particles.q_of(i);
            let big_q0: Vec<f64> = (0..d).map(|nu| q0[nu] + s * p0[nu] * inv_m).collect();
            let mut term = 0.0;
            for nu in 0..d {
                let a_nu = 2.0 * br.a[nu].re;
                let mech = p[nu] - a_nu;
                let grad_dot: f64 = (0..d).map(|mu| 4.0 * PI * br.x[nu * d + mu].im * big_q0[mu]).sum();
                term += 2.0 * a_nu * p0[nu] + 2.0 * mech * grad_dot - SQRT_2 * mech * br.b[nu].im;
            }
            particle_terms += inv_m * term;
            let gv: f64 = (0..d).map(|mu| grad_v[i * d + mu] * big_q0[mu]).sum();
            particle_terms -= 2.0 * gv;
        }
        particle_terms
    }

    /// `m(s, xi)` evaluated block by block exactly as the four-line display
    /// of the limit lemma reads, each bracket followed by its hermitian
    /// conjugate.
    pub fn characteristic_density_m_literal(&self, s: f64, xi: &PhaseSpacePoint, u: &PhaseSpacePoint) -> f64 {
        let d = self.dim();
        let n = self.particles();
        let i_unit = Complex64::new(0.0, 1.0);
        let mut total = 0.0;
        let mut shifted_q = vec![0.0; n * d];
        for i in 0..n {
            let br = self.brackets(s, i, u, &xi.field);
            shifted_q[i * d..(i + 1) * d].copy_from_slice(&br.shifted);
            let mi = self.spec.mass(i);
            let p = u.particles.p_of(i);
            let p0 = xi.particles.p_of(i);
            let mut block1 = Complex64::new(0.0, 0.0);
            let mut block2 = Complex64::new(0.0, 0.0);
            let mut block3 = Complex64::new(0.0, 0.0);
            let mut block3_p0 = Complex64::new(0.0, 0.0);
            for nu in 0..d {
                // <alpha, F> = a, <F, alpha0> = b, <alpha0, F> = conj b, <F, alpha> = conj a.
                let (a, b) = (br.a[nu], br.b[nu]);
                block1 += b.conj() * a - b * a.conj();
                block2 += a * b;
                block3 += b.conj() * p[nu];
                block3_p0 += a * p0[nu];
            }
            let block1 = i_unit / SQRT_2 * block1 / (2.0 * mi);
            let block2 = -(i_unit / SQRT_2 * block2) / mi;
            let block3 = -(i_unit / SQRT_2 * block3 - block3_p0) / mi;
            total += 2.0 * (block1.re + block2.re + block3.re);
        }
        let (_, grad_v) = self.potential(&shifted_q);
        for j in 0..n {
            let inv_m = 1.0 / self.spec.mass(j);
            let p0 = xi.particles.p_of(j);
            let q0 = xi.particles.q_of(j);
            total -= (0..d)
                .map(|mu| grad_v[j * d + mu] * (q0[mu] + s * p0[mu] * inv_m))
                .sum::<f64>();
        }
        total
    }
}

struct Brackets {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    /// `[nu * d + mu]`
    x: Vec<Complex64>,
    /// `q_i + s p_i / m_i`
    shifted: Vec<f64>,
}

/// `xi~ = (z_0 / (i pi), alpha_0 / (sqrt 2 pi))`, i.e. `q~ = p_0 / pi`,
/// `p~ = -q_0 / pi`.
pub fn dual_test_point(xi: &PhaseSpacePoint) -> PhaseSpacePoint {
    let mut out = xi.clone();
    out.particles.q = xi.particles.p.iter().map(|p| p / PI).collect();
    out.particles.p = xi.particles.q.iter().map(|q| -q / PI).collect();
    let scale = 1.0 / (SQRT_2 * PI);
    out.field.values.iter_mut().for_each(|z| *z *= scale);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::draws::{random_point, DrawScales};
    use crate::interaction::FormFactor;
    use crate::state::real_inner;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(potential: PotentialSpec) -> Model {
        let grid = KGrid::build(3, 3.0, 8).unwrap();
        let spec = ParticleSpec::new(
            vec![1.0, 2.0],
            vec![FormFactor::gaussian(1.0), FormFactor::gaussian(1.5).with_charge(-0.7)],
        )
        .unwrap();
        Model::new(grid, spec, potential).unwrap()
    }

    fn draw(m: &Model, seed: u64) -> PhaseSpacePoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_point(m.grid(), m.particles(), DrawScales::default(), &mut rng)
    }

    #[test]
    fn zero_field_gives_zero_vector_potential() {
        let m = model(PotentialSpec::Zero);
        let jet = m.vector_potential_jet(0, &[0.3, 0.1, -0.2], &FieldState::zeros(m.grid()));
        assert!(jet.value.iter().chain(&jet.jacobian).all(|&x| x == 0.0));
    }

    #[test]
    fn jacobian_matches_centered_differences() {
        let m = model(PotentialSpec::Zero);
        let u = draw(&m, 1);
        let q = [0.2, -0.4, 0.1];
        let jet = m.vector_potential_jet(0, &q, &u.field);
        let h = 1e-5;
        for mu in 0..3 {
            let mut qp = q;
            let mut qm = q;
            qp[mu] += h;
            qm[mu] -= h;
            let ap = m.vector_potential_jet(0, &qp, &u.field).value;
            let am = m.vector_potential_jet(0, &qm, &u.field).value;
            for nu in 0..3 {
                let fd = (ap[nu] - am[nu]) / (2.0 * h);
                let scale = 1.0 + jet.jacobian[nu * 3 + mu].abs();
                assert!((fd - jet.jacobian[nu * 3 + mu]).abs() < 1e-6 * scale);
            }
        }
    }

    #[test]
    fn complex_sums_are_real() {
        let m = model(PotentialSpec::SmearedCoulomb { g: 1.0 });
        let u = draw(&m, 2);
        let z = m.vector_potential_complex(0, u.particles.q_of(0), &u.field);
        let a = m.vector_potential_jet(0, u.particles.q_of(0), &u.field).value;
        for nu in 0..3 {
            assert!(z[nu].im.abs() < 1e-12 * (1.0 + z[nu].re.abs()));
            assert!((z[nu].re - a[nu]).abs() < 1e-12 * (1.0 + a[nu].abs()));
        }
        let w = m.smeared_coulomb_complex(0, 1, &[0.3, -0.2, 0.5]);
        assert!(w.im.abs() < 1e-12 * w.norm());
        assert!((w.re - m.smeared_coulomb(0, 1, &[0.3, -0.2, 0.5]).0).abs() < 1e-12 * w.norm());
    }

    #[test]
    fn potential_gradient_is_antisymmetric_and_consistent() {
        let m = model(PotentialSpec::SmearedCoulomb { g: 0.8 });
        let q = vec![0.1, 0.2, -0.3, -0.4, 0.5, 0.05];
        let (v, grad) = m.potential(&q);
        for mu in 0..3 {
            assert!((grad[mu] + grad[3 + mu]).abs() < 1e-13);
        }
        let h = 1e-5;
        for c in 0..6 {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[c] += h;
            qm[c] -= h;
            let fd = (m.potential(&qp).0 - m.potential(&qm).0) / (2.0 * h);
            assert!((fd - grad[c]).abs() < 1e-7 * (1.0 + v.abs()));
        }
        let (w0, _) = m.smeared_coulomb(0, 1, &[0.3, 0.1, 0.2]);
        let (w1, _) = m.smeared_coulomb(0, 1, &[-0.3, -0.1, -0.2]);
        assert!((w0 - w1).abs() < 1e-13);
        assert!(w0.abs() <= m.potential_bound());
    }

    #[test]
    fn hamiltonian_of_free_particles() {
        let m = model(PotentialSpec::Zero);
        let mut u = m.zero_state();
        assert_eq!(m.hamiltonian(&u), 0.0);
        u.particles.p = vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        assert!((m.hamiltonian(&u) - (0.5 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn f_and_g_differ_only_by_transport() {
        let m = model(PotentialSpec::SmearedCoulomb { g: 1.0 });
        let u = draw(&m, 3);
        let f = m.nonlinearity_f(&u);
        let g = m.nonlinearity_g(&u);
        assert_eq!(f.particles.p, g.particles.p);
        assert_eq!(f.field, g.field);
        for i in 0..2 {
            for nu in 0..3 {
                let drift = u.particles.p_of(i)[nu] / m.spec().mass(i);
                let idx = i * 3 + nu;
                assert!((f.particles.q[idx] - g.particles.q[idx] - drift).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn vartheta_at_zero_time_is_g() {
        let m = model(PotentialSpec::Zero);
        let u = draw(&m, 4);
        assert_eq!(m.vartheta(0.0, &u), m.nonlinearity_g(&u));
    }

    #[test]
    fn m_matches_vartheta_pairing() {
        let m = model(PotentialSpec::SmearedCoulomb { g: 1.0 });
        for seed in 0..5 {
            let u = draw(&m, 10 + seed);
            let xi = draw(&m, 100 + seed);
            let s = 0.3 * seed as f64 - 0.5;
            let theta = m.vartheta(s, &u);
            let rhs = -2.0 * PI * real_inner(m.grid(), &theta, &dual_test_point(&xi), 0.0).unwrap();
            let lhs = m.characteristic_density_m(s, &xi, &u);
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()), "{lhs} {rhs}");
        }
    }

    #[test]
    fn literal_m_agrees_on_pure_field_test_points() {
        // With p_0 = q_0 = 0 only the field brackets survive, and those agree.
        let m = model(PotentialSpec::SmearedCoulomb { g: 1.0 });
        let u = draw(&m, 20);
        let mut xi = draw(&m, 21);
        xi.particles.p.iter_mut().for_each(|x| *x = 0.0);
        xi.particles.q.iter_mut().for_each(|x| *x = 0.0);
        let a = m.characteristic_density_m(0.4, &xi, &u);
        let b = m.characteristic_density_m_literal(0.4, &xi, &u);
        assert!((a - b).abs() < 1e-11 * (1.0 + a.abs()), "{a} {b}");
    }

    #[test]
    fn m_vanishes_for_zero_test_point() {
        let m = model(PotentialSpec::SmearedCoulomb { g: 1.0 });
        let u = draw(&m, 30);
        let xi = m.zero_state();
        assert_eq!(m.characteristic_density_m(0.7, &xi, &u), 0.0);
        assert_eq!(m.characteristic_density_m_literal(0.7, &xi, &u), 0.0);
    }
}
