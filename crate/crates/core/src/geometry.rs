//! Momentum-space discretization.
//!
//! Every `dk` integral in the model is replaced by a weighted sum over a
//! truncated Cartesian grid on `[-K, K)^d`. The grid never contains `k = 0`
//! and is symmetric under `k -> -k`, so a sum of `z + conj(z)` style terms is
//! real up to rounding. Each node also carries an orthonormal frame of
//! transverse polarization vectors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation::ComplexSum;

/// One-dimensional rule applied inside every grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// One node at the cell centre.
    #[default]
    Midpoint,
    /// Two Gauss-Legendre nodes per axis and cell.
    Gauss2,
}

impl QuadratureRule {
    /// Node offsets relative to the cell centre (in units of the cell size)
    /// together with their relative weights.
    fn cell_points(self) -> &'static [(f64, f64)] {
        // 1 / (2 sqrt 3)
        const G: f64 = 0.288_675_134_594_812_9;
        match self {
            QuadratureRule::Midpoint => &[(0.0, 1.0)],
            QuadratureRule::Gauss2 => &[(-G, 0.5), (G, 0.5)],
        }
    }

    fn points_per_cell(self) -> usize {
        self.cell_points().len()
    }
}

/// Parameters that fully determine a [`KGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Spatial dimension `d >= 3`.
    pub d: usize,
    /// Cutoff `K`; the grid covers `[-K, K)^d`.
    pub cutoff: f64,
    /// Nodes per axis of the base grid.
    pub nodes_per_axis: usize,
    #[serde(default)]
    pub rule: QuadratureRule,
    /// Number of dyadic refinement levels around the origin.
    #[serde(default)]
    pub origin_refinement: usize,
}

impl GridParams {
    pub fn uniform(d: usize, cutoff: f64, nodes_per_axis: usize) -> Self {
        Self {
            d,
            cutoff,
            nodes_per_axis,
            rule: QuadratureRule::Midpoint,
            origin_refinement: 0,
        }
    }

    pub fn with_rule(mut self, rule: QuadratureRule, origin_refinement: usize) -> Self {
        self.rule = rule;
        self.origin_refinement = origin_refinement;
        self
    }

    fn cells_per_axis(&self) -> usize {
        self.nodes_per_axis / self.rule.points_per_cell()
    }

    fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be at least 3, got {}",
                self.d
            )));
        }
        if !(self.cutoff.is_finite() && self.cutoff > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cutoff must be positive and finite, got {}",
                self.cutoff
            )));
        }
        let n = self.nodes_per_axis;
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "nodes per axis must be a positive even number, got {n}"
            )));
        }
        if !n.is_multiple_of(self.rule.points_per_cell()) {
            return Err(Error::InvalidGrid(format!(
                "nodes per axis ({n}) must be a multiple of the {} points per cell of the {:?} rule",
                self.rule.points_per_cell(),
                self.rule
            )));
        }
        let cells = self.cells_per_axis();
        if self.origin_refinement > 0 && (!cells.is_multiple_of(2) || cells < 4) {
            return Err(Error::InvalidGrid(format!(
                "origin refinement needs an even number (>= 4) of cells per axis, got {cells}"
            )));
        }
        Ok(())
    }
}

/// Truncated momentum grid with positive quadrature weights.
#[derive(Debug, Clone)]
pub struct KGrid {
    params: GridParams,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    norms: Vec<f64>,
}

impl KGrid {
    /// Uniform half-cell-offset midpoint grid with `n` nodes per axis.
    pub fn build(d: usize, cutoff: f64, n: usize) -> Result<Self> {
        Self::with_params(GridParams::uniform(d, cutoff, n))
    }

    pub fn with_params(params: GridParams) -> Result<Self> {
        params.validate()?;
        let d = params.d;
        let cells = params.cells_per_axis();
        let h = 2.0 * params.cutoff / cells as f64;
        let mut grid = KGrid {
            params,
            nodes: Vec::new(),
            weights: Vec::new(),
            norms: Vec::new(),
        };

        // Base grid minus the central block of 4^d cells when refining.
        let (first_hole, levels) = if params.origin_refinement > 0 {
            (Some(2.0 * h), params.origin_refinement)
        } else {
            (None, 0)
        };
        grid.push_block(params.cutoff, h, first_hole);

        // Each level fills the previous hole with cells of half the size and
        // leaves a hole of half the width, except the innermost level.
        let mut half_width = 2.0 * h;
        let mut size = h;
        for level in 1..=levels {
            size *= 0.5;
            let hole = (level < levels).then_some(half_width * 0.5);
            grid.push_block(half_width, size, hole);
            half_width *= 0.5;
        }

        grid.norms = grid
            .nodes
            .chunks_exact(d)
            .map(|k| k.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        Ok(grid)
    }

    /// Adds the nodes of all cells of size `size` tiling `[-half_width, half_width]^d`
    /// whose centres are not all inside `[-hole, hole]^d`.
    fn push_block(&mut self, half_width: f64, size: f64, hole: Option<f64>) {
        let d = self.params.d;
        let points = self.params.rule.cell_points();
        let cells = (2.0 * half_width / size).round() as usize;
        let centres: Vec<f64> = (0..cells)
            .map(|m| -half_width + size * (m as f64 + 0.5))
            .collect();
        let cell_weight = size.powi(d as i32);

        let mut cell_idx = vec![0usize; d];
        loop {
            let inside_hole = hole.is_some_and(|hw| cell_idx.iter().all(|&m| centres[m].abs() < hw));
            if !inside_hole {
                let mut pt_idx = vec![0usize; d];
                loop {
                    let mut w = cell_weight;
                    for axis in 0..d {
                        let (offset, rel) = points[pt_idx[axis]];
                        self.nodes.push(centres[cell_idx[axis]] + offset * size);
                        w *= rel;
                    }
                    self.weights.push(w);
                    if !odometer(&mut pt_idx, points.len()) {
                        break;
                    }
                }
            }
            if !odometer(&mut cell_idx, cells) {
                break;
            }
        }
    }

    /// Grid for the convergence probe: cutoff and nodes per axis both doubled.
    pub fn refined(&self) -> Result<Self> {
        let mut params = self.params;
        params.cutoff *= 2.0;
        params.nodes_per_axis *= 2;
        Self::with_params(params)
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.d
    }

    /// Number of transverse polarizations, `d - 1`.
    pub fn polarizations(&self) -> usize {
        self.params.d - 1
    }

    pub fn cutoff(&self) -> f64 {
        self.params.cutoff
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn node(&self, j: usize) -> &[f64] {
        let d = self.params.d;
        &self.nodes[j * d..(j + 1) * d]
    }

    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    /// `|k_j|`.
    #[inline]
    pub fn norm(&self, j: usize) -> f64 {
        self.norms[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// `sum_j w_j f(j)`, accumulated in node order with compensation.
    pub fn integrate<F>(&self, f: F) -> Complex64
    where
        F: Fn(usize) -> Complex64,
    {
        let mut acc = ComplexSum::new();
        for (j, &w) in self.weights.iter().enumerate() {
            acc.add(f(j) * w);
        }
        acc.total()
    }

    /// Real-valued counterpart of [`KGrid::integrate`].
    pub fn integrate_real<F>(&self, f: F) -> f64
    where
        F: Fn(usize) -> f64,
    {
        let mut acc = crate::summation::NeumaierSum::new();
        for (j, &w) in self.weights.iter().enumerate() {
            acc.add(f(j) * w);
        }
        acc.total()
    }

    /// Integral of a radial function, `sum_j w_j f(|k_j|)`.
    pub fn integrate_radial<F>(&self, f: F) -> f64
    where
        F: Fn(f64) -> f64,
    {
        self.integrate_real(|j| f(self.norms[j]))
    }

    /// Index of the node at `-k_j`.
    ///
    /// Linear scan; intended for tests and diagnostics only.
    pub fn mirror_of(&self, j: usize) -> Option<usize> {
        let k = self.node(j);
        let scale = self.params.cutoff * 1e-12;
        (0..self.len()).find(|&i| {
            self.node(i)
                .iter()
                .zip(k)
                .all(|(a, b)| (a + b).abs() <= scale)
        })
    }
}

/// Increments a mixed-radix counter; returns `false` once it wraps to zero.
fn odometer(idx: &mut [usize], radix: usize) -> bool {
    for digit in idx.iter_mut().rev() {
        *digit += 1;
        if *digit < radix {
            return true;
        }
        *digit = 0;
    }
    false
}

/// Transverse polarization frames `eps_lambda(k_j)`, `lambda = 1..d-1`.
#[derive(Debug, Clone)]
pub struct PolarizationBasis {
    d: usize,
    /// Layout `[node][lambda][nu]`.
    vectors: Vec<f64>,
}

impl PolarizationBasis {
    /// Householder frames: the reflection taking `e_d` to `k/|k|` applied to
    /// `e_1, ..., e_{d-1}`. For `k/|k| = ±e_d` the canonical vectors are used.
    pub fn new(grid: &KGrid) -> Self {
        let d = grid.dim();
        let mut vectors = Vec::with_capacity(grid.len() * (d - 1) * d);
        let mut khat = vec![0.0; d];
        for j in 0..grid.len() {
            let k = grid.node(j);
            let norm = grid.norm(j);
            for (dst, src) in khat.iter_mut().zip(k) {
                *dst = src / norm;
            }
            householder_frame(&khat, &mut vectors);
        }
        Self { d, vectors }
    }

    /// Builds a basis from explicit vectors laid out `[node][lambda][nu]`.
    pub fn from_vectors(d: usize, vectors: Vec<f64>) -> Result<Self> {
        if d < 3 || !vectors.len().is_multiple_of((d - 1) * d) {
            return Err(Error::InvalidArgument(format!(
                "polarization vector buffer of length {} does not match d = {d}",
                vectors.len()
            )));
        }
        Ok(Self { d, vectors })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / ((self.d - 1) * self.d)
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    #[inline]
    pub fn vector(&self, j: usize, lambda: usize) -> &[f64] {
        let d = self.d;
        let start = (j * (d - 1) + lambda) * d;
        &self.vectors[start..start + d]
    }

    /// All `d - 1` vectors at node `j`, concatenated.
    #[inline]
    pub fn frame(&self, j: usize) -> &[f64] {
        let stride = (self.d - 1) * self.d;
        &self.vectors[j * stride..(j + 1) * stride]
    }

    /// Replaces each frame by `eps'_lambda = sum_mu R_j[mu][lambda] eps_mu` for the
    /// `(d-1) x (d-1)` matrix `R_j` (row-major) returned by `rotation(j)`.
    pub fn transformed<F>(&self, rotation: F) -> Self
    where
        F: Fn(usize) -> Vec<f64>,
    {
        let d = self.d;
        let m = d - 1;
        let mut vectors = vec![0.0; self.vectors.len()];
        for j in 0..self.len() {
            let r = rotation(j);
            for lambda in 0..m {
                let dst = (j * m + lambda) * d;
                for mu in 0..m {
                    let coef = r[mu * m + lambda];
                    let src = self.vector(j, mu);
                    for nu in 0..d {
                        vectors[dst + nu] += coef * src[nu];
                    }
                }
            }
        }
        Self { d, vectors }
    }

    /// Largest violation over all nodes of `|khat . eps| = 0` and
    /// `eps_l . eps_m = delta_lm`.
    pub fn gauge_defect(&self, grid: &KGrid) -> (f64, f64) {
        let d = self.d;
        let mut transverse: f64 = 0.0;
        let mut orthonormal: f64 = 0.0;
        for j in 0..grid.len() {
            let k = grid.node(j);
            let norm = grid.norm(j);
            for l in 0..d - 1 {
                let el = self.vector(j, l);
                let dot: f64 = el.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / norm;
                transverse = transverse.max(dot.abs());
                for m in 0..d - 1 {
                    let em = self.vector(j, m);
                    let dot: f64 = el.iter().zip(em).map(|(a, b)| a * b).sum();
                    let target = if l == m { 1.0 } else { 0.0 };
                    orthonormal = orthonormal.max((dot - target).abs());
                }
            }
        }
        (transverse, orthonormal)
    }
}

fn householder_frame(khat: &[f64], out: &mut Vec<f64>) {
    let d = khat.len();
    let last = khat[d - 1];
    let tangential: f64 = khat[..d - 1].iter().map(|x| x * x).sum();
    if tangential == 0.0 {
        for lambda in 0..d - 1 {
            out.extend((0..d).map(|nu| if nu == lambda { 1.0 } else { 0.0 }));
        }
        return;
    }
    // v = e_d - khat; its last entry 1 - khat_d suffers cancellation when
    // khat is close to e_d, so it is formed from the tangential part instead.
    let v_last = if last > 0.0 {
        tangential / (1.0 + last)
    } else {
        1.0 - last
    };
    let v_norm2 = tangential + v_last * v_last;
    for lambda in 0..d - 1 {
        // H e_lambda = e_lambda - 2 v v_lambda / |v|^2 with v_lambda = -khat_lambda.
        let coef = 2.0 * khat[lambda] / v_norm2;
        for (nu, &k) in khat.iter().enumerate().take(d - 1) {
            let delta = if nu == lambda { 1.0 } else { 0.0 };
            out.push(delta + coef * -k);
        }
        out.push(coef * v_last);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn smallest_grid_has_eight_unit_cells() {
        let grid = KGrid::build(3, 1.0, 2).unwrap();
        assert_eq!(grid.len(), 8);
        for j in 0..8 {
            assert!(grid.node(j).iter().all(|x| (x.abs() - 0.5).abs() < 1e-15));
            assert_eq!(grid.weight(j), 1.0);
        }
    }

    #[test]
    fn weight_sum_is_box_volume() {
        let grid = KGrid::build(3, 4.0, 32).unwrap();
        let total: f64 = crate::summation::compensated_sum(grid.weights().iter().copied());
        assert!((total - 512.0).abs() < 1e-10);

        let params = GridParams::uniform(3, 4.0, 16).with_rule(QuadratureRule::Gauss2, 3);
        let grid = KGrid::with_params(params).unwrap();
        let total: f64 = crate::summation::compensated_sum(grid.weights().iter().copied());
        assert!((total - 512.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(KGrid::build(2, 1.0, 4).is_err());
        assert!(KGrid::build(3, 1.0, 5).is_err());
        assert!(KGrid::build(3, 0.0, 4).is_err());
        let odd_cells = GridParams::uniform(3, 1.0, 6).with_rule(QuadratureRule::Gauss2, 1);
        assert!(KGrid::with_params(odd_cells).is_err());
    }

    #[test]
    fn no_origin_and_mirror_symmetric() {
        for params in [
            GridParams::uniform(3, 2.0, 6),
            GridParams::uniform(4, 1.0, 4),
            GridParams::uniform(3, 2.0, 8).with_rule(QuadratureRule::Gauss2, 2),
            GridParams::uniform(3, 2.0, 8).with_rule(QuadratureRule::Midpoint, 3),
        ] {
            let grid = KGrid::with_params(params).unwrap();
            assert!(grid.norms().iter().all(|&r| r > 0.0));
            for j in 0..grid.len() {
                let m = grid.mirror_of(j).expect("mirror node");
                assert_eq!(grid.weight(m), grid.weight(j));
            }
        }
    }

    #[test]
    fn degenerate_axis_uses_canonical_vectors() {
        let mut out = Vec::new();
        householder_frame(&[0.0, 0.0, 1.0], &mut out);
        assert_eq!(out, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        out.clear();
        householder_frame(&[0.0, 0.0, -1.0], &mut out);
        assert_eq!(out, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn householder_frame_spans_gram_schmidt_plane() {
        let s = 1.0 / 3f64.sqrt();
        let khat = [s, s, s];
        let mut hh = Vec::new();
        householder_frame(&khat, &mut hh);

        // Gram-Schmidt from (e_1, e_2) against khat.
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut g1 = [1.0 - s * s, -s * s, -s * s];
        let n1 = dot(&g1, &g1).sqrt();
        g1.iter_mut().for_each(|x| *x /= n1);
        let e2 = [0.0, 1.0, 0.0];
        let mut g2 = [0.0; 3];
        for nu in 0..3 {
            g2[nu] = e2[nu] - dot(&khat, &e2) * khat[nu] - dot(&g1, &e2) * g1[nu];
        }
        let n2 = dot(&g2, &g2).sqrt();
        g2.iter_mut().for_each(|x| *x /= n2);

        // Overlap matrix between the two frames must be orthogonal.
        let h1 = &hh[0..3];
        let h2 = &hh[3..6];
        let o = [
            [dot(h1, &g1), dot(h1, &g2)],
            [dot(h2, &g1), dot(h2, &g2)],
        ];
        for a in 0..2 {
            for b in 0..2 {
                let v = o[a][0] * o[b][0] + o[a][1] * o[b][1];
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-14);
            }
        }
        // Explicit Householder image of e_1: v = e_3 - khat.
        let v = [-s, -s, 1.0 - s];
        let vv = dot(&v, &v);
        let expected: Vec<f64> = (0..3)
            .map(|nu| if nu == 0 { 1.0 } else { 0.0 } - 2.0 * v[nu] * v[0] / vv)
            .collect();
        for nu in 0..3 {
            assert!((h1[nu] - expected[nu]).abs() < 1e-14);
        }
    }

    #[test]
    fn gauge_identities_hold_on_every_node() {
        for d in [3, 4] {
            let grid = KGrid::build(d, 2.0, if d == 3 { 12 } else { 6 }).unwrap();
            let basis = PolarizationBasis::new(&grid);
            let (t, o) = basis.gauge_defect(&grid);
            assert!(t <= 1e-12 && o <= 1e-12, "d={d}: {t} {o}");
        }
    }

    #[test]
    fn frames_are_deterministic() {
        let grid = KGrid::build(3, 2.0, 8).unwrap();
        let a = PolarizationBasis::new(&grid);
        let b = PolarizationBasis::new(&grid);
        assert_eq!(a.vectors, b.vectors);
    }

    #[test]
    fn integrate_zero_and_conjugate_parity() {
        let grid = KGrid::build(3, 3.0, 10).unwrap();
        assert_eq!(grid.integrate(|_| Complex64::new(0.0, 0.0)), Complex64::new(0.0, 0.0));
        // f(k) = g(|k|) e^{i a.k} satisfies f(-k) = conj f(k).
        let a = [0.7, -1.3, 0.4];
        let value = grid.integrate(|j| {
            let k = grid.node(j);
            let phase: f64 = k.iter().zip(&a).map(|(x, y)| x * y).sum();
            Complex64::from_polar((-grid.norm(j).powi(2)).exp(), phase)
        });
        assert!(value.im.abs() <= 1e-12 * value.norm());
    }

    fn gaussian_errors(rule: QuadratureRule, levels: usize, ns: &[usize]) -> Vec<(f64, f64)> {
        let exact_smooth = (PI / 2.0).powf(1.5);
        let exact_singular = 2.0 * PI * (PI / 2.0).sqrt();
        ns.iter()
            .map(|&n| {
                let params = GridParams::uniform(3, 6.0, n).with_rule(rule, levels);
                let grid = KGrid::with_params(params).unwrap();
                let smooth = grid.integrate_radial(|r| (-2.0 * r * r).exp());
                let singular = grid.integrate_radial(|r| (-2.0 * r * r).exp() / (r * r));
                ((smooth - exact_smooth).abs(), (singular - exact_singular).abs())
            })
            .collect()
    }

    #[test]
    fn midpoint_rule_converges_on_gaussian_oracles() {
        let errs = gaussian_errors(QuadratureRule::Midpoint, 0, &[12, 24, 48]);
        assert!(errs[2].0 < 1e-4);
        for w in errs.windows(2) {
            assert!(w[1].1 < w[0].1, "{errs:?}");
        }
        // The 1/|k|^2 singularity limits the plain rule to first order.
        let ratio = errs[1].1 / errs[2].1;
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn graded_gauss_rule_is_accurate_near_the_singularity() {
        let errs = gaussian_errors(QuadratureRule::Gauss2, 8, &[24, 48]);
        assert!(errs[1].1 / 7.8748 < 1e-3, "{errs:?}");
        assert!(errs[1].1 < errs[0].1);
    }
}
