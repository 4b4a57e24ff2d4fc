//! Pair potentials `V(q) = sum_{i<j} w_ij(q_i - q_j)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Zero,
    /// `w_ij(x) = g * int chi_i chi_j / |k|^2 e^{2 pi i k.x} dk`, evaluated on the grid.
    SmearedCoulomb { g: f64 },
    /// `w(x) = amplitude * prod_nu cos(wavevector_nu x_nu)` for every pair.
    CosProduct { amplitude: f64, wavevector: Vec<f64> },
}

impl PotentialSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            PotentialSpec::Zero => Ok(()),
            PotentialSpec::SmearedCoulomb { g } => {
                if g.is_finite() && *g > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "coupling g must be positive, got {g}"
                    )))
                }
            }
            PotentialSpec::CosProduct {
                amplitude,
                wavevector,
            } => {
                if wavevector.len() != d {
                    return Err(Error::InvalidArgument(format!(
                        "wavevector has {} components in dimension {d}",
                        wavevector.len()
                    )));
                }
                if !amplitude.is_finite() || wavevector.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite cos-product parameter".into()));
                }
                Ok(())
            }
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            PotentialSpec::Zero => "zero",
            PotentialSpec::SmearedCoulomb { .. } => "smeared_coulomb",
            PotentialSpec::CosProduct { .. } => "cos_product",
        }
    }
}

/// Value and gradient of the cos-product pair function at `x`.
pub(crate) fn cos_product(amplitude: f64, wavevector: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
    let d = x.len();
    let (sines, cosines): (Vec<f64>, Vec<f64>) = wavevector
        .iter()
        .zip(x)
        .map(|(kappa, xi)| (kappa * xi).sin_cos())
        .unzip();
    let value = amplitude * cosines.iter().product::<f64>();
    let grad = (0..d)
        .map(|mu| {
            let others: f64 = (0..d).filter(|&nu| nu != mu).map(|nu| cosines[nu]).product();
            -amplitude * wavevector[mu] * sines[mu] * others
        })
        .collect();
    (value, grad)
}

/// `sup |grad w|` for the cos-product family.
pub(crate) fn cos_product_gradient_bound(amplitude: f64, wavevector: &[f64]) -> f64 {
    amplitude.abs() * wavevector.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fourier-side kernel of the smeared Coulomb pair function at one node,
/// without the quadrature weight.
#[inline]
pub(crate) fn coulomb_kernel(g: f64, chi_i: f64, chi_j: f64, k_norm: f64) -> f64 {
    g * chi_i * chi_j / (k_norm * k_norm)
}

pub(crate) const TWO_PI: f64 = 2.0 * PI;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cos_product_gradient_matches_differences() {
        let amp = 0.7;
        let kv = [1.3, -0.4, 2.1];
        let x = [0.3, 0.9, -0.2];
        let (_, grad) = cos_product(amp, &kv, &x);
        let h = 1e-5;
        for mu in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[mu] += h;
            xm[mu] -= h;
            let fd = (cos_product(amp, &kv, &xp).0 - cos_product(amp, &kv, &xm).0) / (2.0 * h);
            assert!((fd - grad[mu]).abs() < 1e-9);
            assert!(grad[mu].abs() <= cos_product_gradient_bound(amp, &kv));
        }
    }

    #[test]
    fn validation() {
        assert!(PotentialSpec::SmearedCoulomb { g: -1.0 }.validate(3).is_err());
        assert!(PotentialSpec::CosProduct {
            amplitude: 1.0,
            wavevector: vec![1.0, 2.0]
        }
        .validate(3)
        .is_err());
        assert!(PotentialSpec::Zero.validate(3).is_ok());
    }
}
