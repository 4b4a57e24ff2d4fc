//! Random phase-space points for property checks.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::KGrid;
use crate::state::{FieldState, ParticleState, PhaseSpacePoint};

/// Scales of a random draw. Field modes are standard complex normals times
/// `field * e^{-|k|^2 / (2 envelope^2)}`, so every weighted norm stays finite.
#[derive(Debug, Clone, Copy)]
pub struct DrawScales {
    pub momentum: f64,
    pub position: f64,
    pub field: f64,
    pub envelope: f64,
}

impl Default for DrawScales {
    fn default() -> Self {
        Self {
            momentum: 1.0,
            position: 1.0,
            field: 1.0,
            envelope: 1.0,
        }
    }
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_field<R: Rng + ?Sized>(grid: &KGrid, scale: f64, envelope: f64, rng: &mut R) -> FieldState {
    let m = grid.polarizations();
    let mut values = Vec::with_capacity(grid.len() * m);
    for j in 0..grid.len() {
        let r = grid.norm(j);
        let amp = scale * (-(r * r) / (2.0 * envelope * envelope)).exp();
        for _ in 0..m {
            values.push(Complex64::new(amp * normal(rng), amp * normal(rng)));
        }
    }
    FieldState::new(grid, values).expect("length matches grid by construction")
}

pub fn random_point<R: Rng + ?Sized>(grid: &KGrid, n: usize, scales: DrawScales, rng: &mut R) -> PhaseSpacePoint {
    let d = grid.dim();
    let p = (0..n * d).map(|_| scales.momentum * normal(rng)).collect();
    let q = (0..n * d).map(|_| scales.position * normal(rng)).collect();
    PhaseSpacePoint::new(
        ParticleState::new(d, p, q).expect("consistent lengths"),
        random_field(grid, scales.field, scales.envelope, rng),
    )
}

/// Uniformly distributed unit vector in `R^d`.
pub fn unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Random orthogonal `m x m` matrix (row-major) by Gram-Schmidt on normal columns.
pub fn orthogonal_matrix<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    while cols.len() < m {
        let mut v: Vec<f64> = (0..m).map(|_| normal(rng)).collect();
        for c in &cols {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            cols.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut out = vec![0.0; m * m];
    for (col, c) in cols.iter().enumerate() {
        for row in 0..m {
            out[row * m + col] = c[row];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_matrix_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = orthogonal_matrix(3, &mut rng);
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k * 3 + a] * r[k * 3 + b]).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
