//! Property suites: each runs a family of numerical checks and reports the
//! measured value next to its tolerance.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::draws::{orthogonal_matrix, random_point, DrawScales};
use crate::error::{Error, Result};
use crate::geometry::{GridParams, KGrid, PolarizationBasis, QuadratureRule};
use crate::integrator::{
    count_violations, divergence_report, evolve, evolve_endpoint, EvolveOptions, Scheme,
};
use crate::interaction::{dual_test_point, FormFactor, Model, PotentialSpec};
use crate::measures::{
    characteristic_residual, moment_report, push_forward, sample_measure, Ensemble, MeasureSpec,
};
use crate::scenarios::{self, Scenario};
use crate::state::{
    field_norm, field_norm_sqr, phase_norm, real_inner, FieldState, ParticleSpec, PhaseSpacePoint,
    SobolevWeight,
};

/// Version of the suite report layout.
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Gauge,
    Quadrature,
    LemmaBounds,
    DuhamelOrder,
    Energy,
    Reversibility,
    Gronwall,
    Characteristic,
    MvfiIdentity,
    Moments,
    FrameCovariance,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Gauge,
        Suite::Quadrature,
        Suite::LemmaBounds,
        Suite::DuhamelOrder,
        Suite::Energy,
        Suite::Reversibility,
        Suite::Gronwall,
        Suite::Characteristic,
        Suite::MvfiIdentity,
        Suite::Moments,
        Suite::FrameCovariance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gauge => "gauge",
            Suite::Quadrature => "quadrature",
            Suite::LemmaBounds => "lemma-bounds",
            Suite::DuhamelOrder => "duhamel-order",
            Suite::Energy => "energy",
            Suite::Reversibility => "reversibility",
            Suite::Gronwall => "gronwall",
            Suite::Characteristic => "characteristic",
            Suite::MvfiIdentity => "mvfi-identity",
            Suite::Moments => "moments",
            Suite::FrameCovariance => "frame-covariance",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    /// `|measured - target| <= tolerance`
    Near { target: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub property: String,
    pub measured: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn at_most(property: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self::new(property, measured, tolerance, Relation::AtMost)
    }

    pub fn at_least(property: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self::new(property, measured, tolerance, Relation::AtLeast)
    }

    pub fn near(property: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        Self::new(property, measured, tolerance, Relation::Near { target })
    }

    fn new(property: impl Into<String>, measured: f64, tolerance: f64, relation: Relation) -> Self {
        let passed = match relation {
            Relation::AtMost => measured <= tolerance,
            Relation::AtLeast => measured >= tolerance,
            Relation::Near { target } => (measured - target).abs() <= tolerance,
        };
        Self {
            property: property.into(),
            measured,
            tolerance,
            relation,
            passed,
        }
    }

    fn bound_text(&self) -> String {
        match self.relation {
            Relation::AtMost => format!("<= {:.3e}", self.tolerance),
            Relation::AtLeast => format!(">= {:.3e}", self.tolerance),
            Relation::Near { target } => format!("{target} +- {}", self.tolerance),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub format_version: u32,
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Supporting measurements that are not themselves checked.
    pub data: Value,
}

impl SuiteReport {
    fn new(suite: Suite, checks: Vec<Check>, data: Value) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            suite,
            passed: checks.iter().all(|c| c.passed),
            checks,
            data,
        }
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Fixed-width human-readable table.
    pub fn table(&self) -> String {
        let width = self
            .checks
            .iter()
            .map(|c| c.property.len())
            .max()
            .unwrap_or(8)
            .max(8);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "suite {}: {}",
            self.suite.name(),
            if self.passed { "PASS" } else { "FAIL" }
        );
        let _ = writeln!(out, "{:<width$}  {:>13}  {:<22}  result", "property", "measured", "bound");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<width$}  {:>13.6e}  {:<22}  {}",
                c.property,
                c.measured,
                c.bound_text(),
                if c.passed { "pass" } else { "FAIL" }
            );
        }
        out
    }
}

/// Inputs shared by all suites.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Number of random draws for the sampling suites; each suite has its own default.
    pub draws: Option<usize>,
    /// Scenario for the dynamical suites; the built-in reference when absent.
    pub scenario: Option<Scenario>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            draws: None,
            scenario: None,
        }
    }
}

impl VerifyOptions {
    fn scenario(&self) -> Result<Scenario> {
        match &self.scenario {
            Some(s) => Ok(s.clone()),
            None => scenarios::reference(),
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

pub fn run_suite(suite: Suite, options: &VerifyOptions) -> Result<SuiteReport> {
    match suite {
        Suite::Gauge => gauge(),
        Suite::Quadrature => quadrature(),
        Suite::LemmaBounds => lemma_bounds(options),
        Suite::DuhamelOrder => duhamel_order(options),
        Suite::Energy => energy(options),
        Suite::Reversibility => reversibility(options),
        Suite::Gronwall => gronwall(options),
        Suite::Characteristic => characteristic(options),
        Suite::MvfiIdentity => mvfi_identity(options),
        Suite::Moments => moments(options),
        Suite::FrameCovariance => frame_covariance(options),
    }
}

fn x0(grid: &KGrid, u: &PhaseSpacePoint) -> f64 {
    phase_norm(grid, u, SobolevWeight::inhomogeneous(0.0))
}

// ---------------------------------------------------------------- gauge

fn gauge() -> Result<SuiteReport> {
    let grids = [
        GridParams::uniform(3, 6.0, 48),
        GridParams::uniform(3, 6.0, 24).with_rule(QuadratureRule::Gauss2, 8),
        GridParams::uniform(4, 2.0, 8),
    ];
    let mut checks = Vec::new();
    let mut data = Vec::new();
    for params in grids {
        let grid = KGrid::with_params(params)?;
        let basis = PolarizationBasis::new(&grid);
        let (transverse, orthonormal) = basis.gauge_defect(&grid);
        let again = PolarizationBasis::new(&grid);
        let mismatches = (0..grid.len())
            .filter(|&j| basis.frame(j) != again.frame(j))
            .count();
        let label = format!("d={} K={} N={} {:?}", params.d, params.cutoff, params.nodes_per_axis, params.rule);
        checks.push(Check::at_most(format!("max |khat.eps| [{label}]"), transverse, 1e-12));
        checks.push(Check::at_most(format!("max |eps.eps - delta| [{label}]"), orthonormal, 1e-12));
        checks.push(Check::at_most(format!("frame rebuild mismatches [{label}]"), mismatches as f64, 0.0));
        data.push(json!({ "grid": params, "nodes": grid.len() }));
    }
    Ok(SuiteReport::new(Suite::Gauge, checks, json!({ "grids": data })))
}

// ----------------------------------------------------------- quadrature

/// Closed forms of the three radial test integrals in three dimensions.
pub fn quadrature_oracles() -> [(&'static str, f64); 3] {
    [
        ("||e^-|k|^2||^2", (PI / 2.0).powf(1.5)),
        ("||e^-|k|^2/|k|||^2", 2.0 * PI * (PI / 2.0).sqrt()),
        ("|||k|^1/2 e^-|k|^2||^2", PI / 2.0),
    ]
}

fn oracle_values(grid: &KGrid) -> [f64; 3] {
    let f = |r: f64| (-2.0 * r * r).exp();
    [
        grid.integrate_radial(f),
        grid.integrate_radial(|r| f(r) / (r * r)),
        grid.integrate_radial(|r| f(r) * r),
    ]
}

fn quadrature() -> Result<SuiteReport> {
    let oracles = quadrature_oracles();
    let graded = |n| KGrid::with_params(GridParams::uniform(3, 6.0, n).with_rule(QuadratureRule::Gauss2, 8));
    let coarse = oracle_values(&graded(48)?);
    let fine = oracle_values(&graded(96)?);
    let midpoint = oracle_values(&KGrid::build(3, 6.0, 48)?);
    let midpoint64 = oracle_values(&KGrid::build(3, 6.0, 64)?);

    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (idx, (name, exact)) in oracles.iter().enumerate() {
        let e48 = (coarse[idx] - exact).abs() / exact;
        let e96 = (fine[idx] - exact).abs() / exact;
        checks.push(Check::at_most(format!("rel error {name} at N=48"), e48, 1e-2));
        checks.push(Check::at_most(format!("error ratio N=96/N=48 {name}"), e96 / e48, 1.0));
        rows.push(json!({
            "integral": name,
            "exact": exact,
            "graded_gauss_n48": coarse[idx],
            "graded_gauss_n96": fine[idx],
            "midpoint_n48": midpoint[idx],
            "midpoint_n48_rel_error": (midpoint[idx] - exact).abs() / exact,
        }));
    }
    checks.push(Check::at_most(
        "midpoint N=64 |smooth gaussian - exact|",
        (midpoint64[0] - oracles[0].1).abs(),
        1e-4,
    ));
    Ok(SuiteReport::new(
        Suite::Quadrature,
        checks,
        json!({ "rule": "gauss2 with 8 origin refinement levels, K = 6", "integrals": rows }),
    ))
}

// --------------------------------------------------------- lemma bounds

fn lemma_model() -> Result<Model> {
    let grid = KGrid::build(3, 3.0, 12)?;
    let spec = ParticleSpec::new(
        vec![1.0, 0.5, 2.0],
        vec![
            FormFactor::gaussian(1.0),
            FormFactor::gaussian(0.7).with_charge(-0.8),
            FormFactor::ball(1.5),
        ],
    )?;
    Model::new(grid, spec, PotentialSpec::SmearedCoulomb { g: 1.0 })
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

#[derive(Default)]
struct Tally {
    evaluated: usize,
    violations: usize,
    /// Largest `lhs / rhs`.
    worst: f64,
}

impl Tally {
    fn record(&mut self, lhs: f64, rhs: f64) {
        self.evaluated += 1;
        if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
            self.violations += 1;
        }
        if rhs > 0.0 {
            self.worst = self.worst.max(lhs / rhs);
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lemma_bounds(options: &VerifyOptions) -> Result<SuiteReport> {
    let model = lemma_model()?;
    let grid = model.grid();
    let d = grid.dim();
    let n = model.particles();
    let draws = options.draws.unwrap_or(1000);
    let root = (2.0 * (d - 1) as f64).sqrt();
    let two_pi = 2.0 * PI;
    let norms: Vec<_> = (0..n).map(|i| model.coupling_norms(i)).collect();

    let names = [
        "A bound in L2",
        "A bound in H1/2",
        "grad A bound in L2",
        "grad A bound in H1/2",
        "A Lipschitz",
        "grad A Lipschitz",
        "F_p bound",
        "F_q bound",
        "F_alpha L2 bound",
        "F_alpha H1 bound",
        "w_ij value bound",
        "w_ij gradient bound",
    ];
    let mut tallies: Vec<Tally> = names.iter().map(|_| Tally::default()).collect();
    let mut vartheta_ratio: f64 = 0.0;

    let mut rng = options.rng(3);
    for _ in 0..draws {
        let sigma = [0.5, 0.75, 1.0][rng.random_range(0..3)];
        let scales = |rng: &mut ChaCha8Rng| DrawScales {
            momentum: log_uniform(rng, 0.1, 10.0),
            position: log_uniform(rng, 0.1, 3.0),
            field: log_uniform(rng, 0.01, 10.0),
            envelope: log_uniform(rng, 0.3, 3.0),
        };
        let s1 = scales(&mut rng);
        let s2 = scales(&mut rng);
        let u = random_point(grid, n, s1, &mut rng);
        let v = random_point(grid, n, s2, &mut rng);
        let (a1, a2) = (&u.field, &v.field);
        let l2 = |a: &FieldState| field_norm(grid, a, SobolevWeight::homogeneous(0.0));
        let h12 = |a: &FieldState| field_norm(grid, a, SobolevWeight::homogeneous(0.5));
        let diff = FieldState::new(
            grid,
            a1.values.iter().zip(&a2.values).map(|(x, y)| x - y).collect(),
        )?;

        for (i, &c) in norms.iter().enumerate() {
            let q1 = u.particles.q_of(i);
            let q2 = v.particles.q_of(i);
            let j1 = model.vector_potential_jet(i, q1, a1);
            let j2 = model.vector_potential_jet(i, q2, a2);
            tallies[0].record(norm(&j1.value), root * c.inverse_sqrt_k * l2(a1));
            tallies[1].record(norm(&j1.value), root * c.inverse_k * h12(a1));
            for nu in 0..d {
                let g = norm(j1.gradient(nu));
                tallies[2].record(g, two_pi * root * c.sqrt_k * l2(a1));
                tallies[3].record(g, two_pi * root * c.plain * h12(a1));
            }
            let dq: Vec<f64> = q1.iter().zip(q2).map(|(a, b)| a - b).collect();
            let dq = norm(&dq);
            let da: Vec<f64> = j1.value.iter().zip(&j2.value).map(|(a, b)| a - b).collect();
            tallies[4].record(
                norm(&da),
                root * c.inverse_sqrt_k * l2(&diff) + two_pi * root * c.sqrt_k * dq * l2(a2),
            );
            let sob = model.sobolev_coupling_norm(i, sigma);
            let a2_sigma = field_norm(grid, a2, SobolevWeight::homogeneous(sigma));
            for nu in 0..d {
                let dg: Vec<f64> = j1
                    .gradient(nu)
                    .iter()
                    .zip(j2.gradient(nu))
                    .map(|(a, b)| a - b)
                    .collect();
                tallies[5].record(
                    norm(&dg),
                    two_pi * root * c.sqrt_k * l2(&diff) + two_pi * two_pi * root * sob * dq * a2_sigma,
                );
            }
        }

        // Nonlinearity bounds with explicit constants.
        let f = model.nonlinearity_f(&u);
        let alpha = l2(a1);
        let mut field_l2 = 0.0;
        let mut field_h1 = 0.0;
        for (i, &c) in norms.iter().enumerate() {
            let m = model.spec().mass(i);
            let mech = norm(u.particles.p_of(i)) + root * c.inverse_sqrt_k * alpha;
            tallies[6].record(
                norm(&f.particles.p[i * d..(i + 1) * d]),
                mech * (d as f64).sqrt() * two_pi * root * c.sqrt_k * alpha / m
                    + model.potential_gradient_bound(i),
            );
            tallies[7].record(norm(&f.particles.q[i * d..(i + 1) * d]), mech / m);
            field_l2 += c.inverse_sqrt_k * mech / (m * SQRT_2);
            field_h1 += c.sqrt_k * mech / (m * SQRT_2);
        }
        tallies[8].record(field_norm(grid, &f.field, SobolevWeight::homogeneous(0.0)), field_l2);
        tallies[9].record(field_norm(grid, &f.field, SobolevWeight::homogeneous(1.0)), field_h1);

        // Pair potentials at the sampled separations.
        for i in 0..n {
            for j in i + 1..n {
                let x: Vec<f64> = (0..d)
                    .map(|mu| u.particles.q_of(i)[mu] - u.particles.q_of(j)[mu])
                    .collect();
                let (w, gw) = model.smeared_coulomb(i, j, &x);
                let (wm, _) = model.smeared_coulomb(i, j, &x.iter().map(|v| -v).collect::<Vec<_>>());
                tallies[10].record(w.abs().max((w - wm).abs()), model.potential_bound());
                tallies[11].record(norm(&gw), model.potential_gradient_bound(i));
            }
        }

        let t = rng.random_range(-1.0..1.0);
        let theta = model.vartheta(t, &u);
        let growth = phase_norm(grid, &theta, SobolevWeight::inhomogeneous(sigma))
            / (x0(grid, &u).powi(2) + 1.0);
        vartheta_ratio = vartheta_ratio.max(growth);
    }

    let mut checks: Vec<Check> = names
        .iter()
        .zip(&tallies)
        .map(|(name, t)| Check::at_most(format!("{name} violations"), t.violations as f64, 0.0))
        .collect();
    checks.push(Check::at_most(
        "vartheta growth constant (finite)",
        vartheta_ratio,
        f64::MAX,
    ));
    let detail: Vec<Value> = names
        .iter()
        .zip(&tallies)
        .map(|(name, t)| json!({ "bound": name, "evaluated": t.evaluated, "violations": t.violations, "max_lhs_over_rhs": t.worst }))
        .collect();
    Ok(SuiteReport::new(
        Suite::LemmaBounds,
        checks,
        json!({ "draws": draws, "bounds": detail, "vartheta_growth_constant": vartheta_ratio }),
    ))
}

// -------------------------------------------------------- duhamel order

/// `(T, coarse dt)` of the order study.
pub const ORDER_STUDY: (f64, f64) = (1.0, 0.02);

fn duhamel_order(options: &VerifyOptions) -> Result<SuiteReport> {
    let sc = options.scenario()?;
    let (m, u0) = (&sc.model, &sc.initial);
    let grid = m.grid();
    let (t_end, dt) = ORDER_STUDY;
    let schemes = [Scheme::Strang, Scheme::InteractionRk4];
    let runs: Vec<Result<[PhaseSpacePoint; 4]>> = schemes
        .par_iter()
        .map(|&scheme| {
            Ok([
                evolve_endpoint(m, u0, t_end, dt, scheme)?,
                evolve_endpoint(m, u0, t_end, dt / 2.0, scheme)?,
                evolve_endpoint(m, u0, t_end, dt / 4.0, scheme)?,
                evolve_endpoint(m, u0, t_end, dt / 8.0, scheme)?,
            ])
        })
        .collect();
    let runs: Vec<[PhaseSpacePoint; 4]> = runs.into_iter().collect::<Result<_>>()?;

    let mut checks = Vec::new();
    let mut data = serde_json::Map::new();
    for (scheme, r) in schemes.iter().zip(&runs) {
        let e1 = x0(grid, &r[0].sub(&r[3]));
        let e2 = x0(grid, &r[1].sub(&r[3]));
        checks.push(Check::near(
            format!("{} error ratio dt -> dt/2", scheme.name()),
            e1 / e2,
            4.0,
            0.8,
        ));
        data.insert(
            scheme.name().into(),
            json!({ "error_dt": e1, "error_dt_half": e2, "observed_order": (e1 / e2).log2() }),
        );
    }
    let cross: Vec<f64> = (0..3)
        .map(|k| x0(grid, &runs[0][k].sub(&runs[1][k])))
        .collect();
    let constants: Vec<f64> = cross
        .iter()
        .enumerate()
        .map(|(k, c)| c / (dt / (1u32 << k) as f64).powi(2))
        .collect();
    let drift = (constants[1] - constants[2]).abs() / constants[2];
    checks.push(Check::at_most(
        "cross-scheme constant C(dt/2) vs C(dt/4) relative change",
        drift,
        0.2,
    ));
    data.insert(
        "cross_scheme".into(),
        json!({ "dt": [dt, dt / 2.0, dt / 4.0], "distance": cross, "fitted_c": constants }),
    );
    data.insert("t_end".into(), json!(t_end));
    Ok(SuiteReport::new(Suite::DuhamelOrder, checks, Value::Object(data)))
}

// --------------------------------------------------------------- energy

fn energy(options: &VerifyOptions) -> Result<SuiteReport> {
    let sc = options.scenario()?;
    let (m, u0) = (&sc.model, &sc.initial);
    let h0 = m.hamiltonian(u0);
    let t_end = 10.0;
    let dts = [2e-3, 1e-3];
    let runs: Vec<_> = dts
        .par_iter()
        .map(|&dt| {
            evolve(
                m,
                u0,
                t_end,
                dt,
                Scheme::Strang,
                EvolveOptions {
                    sample_every: (0.1 / dt).round() as usize,
                    keep_states: true,
                },
            )
        })
        .collect::<Result<_>>()?;
    let drifts: Vec<f64> = runs
        .iter()
        .map(|tr| {
            tr.samples
                .iter()
                .map(|s| (s.diagnostics.hamiltonian - h0).abs())
                .fold(0.0, f64::max)
                / h0.abs()
        })
        .collect();
    let fine = &runs[1];
    let field_energy = fine
        .samples
        .iter()
        .map(|s| {
            field_norm_sqr(
                m.grid(),
                &s.state.as_ref().expect("states kept").field,
                SobolevWeight::homogeneous(0.5),
            )
        })
        .fold(0.0, f64::max);
    let bound = h0 + m.potential_bound() + drifts[1] * h0.abs();
    let checks = vec![
        Check::at_most("relative energy drift, dt = 1e-3, T = 10", drifts[1], 1e-6),
        Check::near("drift ratio dt = 2e-3 vs 1e-3", drifts[0] / drifts[1], 4.0, 0.8),
        Check::at_most(
            "max field H1/2 energy minus (H(0) + sup|V| + drift)",
            field_energy - bound,
            0.0,
        ),
    ];
    Ok(SuiteReport::new(
        Suite::Energy,
        checks,
        json!({ "h0": h0, "dt": dts, "relative_drift": drifts, "sup_v": m.potential_bound(), "max_field_energy": field_energy }),
    ))
}

// -------------------------------------------------------- reversibility

fn reversibility(options: &VerifyOptions) -> Result<SuiteReport> {
    let sc = options.scenario()?;
    let (m, u0) = (&sc.model, &sc.initial);
    let forward = evolve_endpoint(m, u0, 1.0, 1e-3, Scheme::Strang)?;
    let back = evolve_endpoint(m, &forward, -1.0, -1e-3, Scheme::Strang)?;
    let rel = x0(m.grid(), &back.sub(u0)) / x0(m.grid(), u0);
    Ok(SuiteReport::new(
        Suite::Reversibility,
        vec![Check::at_most("relative X0 distance after T = 1 and back", rel, 1e-8)],
        json!({ "t_end": 1.0, "dt": 1e-3 }),
    ))
}

// ------------------------------------------------------------- gronwall

fn unit_direction(model: &Model, rng: &mut ChaCha8Rng) -> PhaseSpacePoint {
    let mut dir = random_point(model.grid(), model.particles(), DrawScales::default(), rng);
    let n = x0(model.grid(), &dir);
    dir.scale(1.0 / n);
    dir
}

fn gronwall(options: &VerifyOptions) -> Result<SuiteReport> {
    let sc = options.scenario()?;
    let (m, u0) = (&sc.model, &sc.initial);
    let mut rng = options.rng(7);
    let dir = unit_direction(m, &mut rng);
    let (t_end, dt, every) = (5.0, 0.01, 5);
    let eps = [1e-6, 1e-5];
    let reports: Vec<_> = eps
        .par_iter()
        .map(|&e| divergence_report(m, u0, e, &dir, t_end, dt, Scheme::Strang, every))
        .collect::<Result<_>>()?;
    let (c1, c2) = (reports[0].growth_constant, reports[1].growth_constant);
    let cross = count_violations(
        reports[1].epsilon,
        c1 * 1.2,
        &reports[1].times,
        &reports[1].distances,
    );

    // Free dynamics: explicit separation.
    let free_spec = ParticleSpec::new(vec![2.0], vec![FormFactor::gaussian(1.0).with_charge(0.0)])?;
    let free = Model::new(m.grid().clone(), free_spec, PotentialSpec::Zero)?;
    let mut fu = free.zero_state();
    fu.particles.p = vec![0.3, 0.0, -0.2];
    let fdir = unit_direction(&free, &mut rng);
    let frep = divergence_report(&free, &fu, 1e-6, &fdir, 2.0, 0.05, Scheme::Strang, 1)?;
    let free_excess = frep
        .times
        .iter()
        .zip(&frep.distances)
        .map(|(t, d)| d / (1e-6 * (1.0 + t / 2.0)))
        .fold(0.0, f64::max);

    let checks = vec![
        Check::at_most("envelope violations, eps = 1e-6", reports[0].violations as f64, 0.0),
        Check::at_most("envelope violations, eps = 1e-5", reports[1].violations as f64, 0.0),
        Check::at_most(
            "relative change of C between eps values",
            (c1 - c2).abs() / c1.max(c2),
            0.2,
        ),
        Check::at_most("eps = 1e-5 violations of the eps = 1e-6 envelope (1.2 C)", cross as f64, 0.0),
        Check::at_most("free dynamics: max d(t) / ((1 + t/m) eps)", free_excess, 1.0 + 1e-9),
    ];
    Ok(SuiteReport::new(
        Suite::Gronwall,
        checks,
        json!({ "t_end": t_end, "dt": dt, "reports": reports }),
    ))
}

// ------------------------------------------------------- characteristic

/// `count` seeded random test directions with `X^{1/2}` norm `size`.
pub fn test_directions(model: &Model, count: usize, size: f64, seed: u64) -> Vec<PhaseSpacePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(11);
    (0..count).map(|_| test_direction(model, size, &mut rng)).collect()
}

fn test_direction(model: &Model, size: f64, rng: &mut ChaCha8Rng) -> PhaseSpacePoint {
    let mut y = random_point(model.grid(), model.particles(), DrawScales::default(), rng);
    let n = phase_norm(model.grid(), &y, SobolevWeight::inhomogeneous(0.5));
    y.scale(size / n);
    y
}

/// `(residual, mc_stderr)` per test direction for the ensemble pushed to `t_end`.
fn char_residuals(
    model: &Model,
    e0: &Ensemble,
    t_end: f64,
    dt: f64,
    ys: &[PhaseSpacePoint],
    sigma: f64,
) -> Result<Vec<(f64, f64)>> {
    let keep = EvolveOptions {
        sample_every: 1,
        keep_states: true,
    };
    let e = push_forward(model, e0, t_end, dt, Scheme::Strang, Some(keep))?;
    ys.iter()
        .map(|y| {
            let r = characteristic_residual(model, &e, y, 0.0, t_end, sigma)?;
            Ok((r.residual, r.mc_stderr))
        })
        .collect()
}

fn characteristic(options: &VerifyOptions) -> Result<SuiteReport> {
    let sc = options.scenario()?;
    let m = &sc.model;
    let sigma = 0.5;
    let t_end = 1.0;
    let ys = test_directions(m, 5, 0.3, options.seed);
    let mut checks = Vec::new();

    // Dirac: order of decay under dt refinement.
    let dirac = sample_measure(
        &MeasureSpec::Dirac {
            center: sc.initial.clone(),
        },
        1,
        options.seed,
        m.grid(),
    )?;
    let dts = [0.04, 0.02, 0.01];
    let dirac_runs: Vec<Vec<(f64, f64)>> = dts
        .par_iter()
        .map(|&dt| char_residuals(m, &dirac, t_end, dt, &ys, sigma))
        .collect::<Result<_>>()?;
    let mut dirac_rows = Vec::new();
    for (k, _) in ys.iter().enumerate() {
        let r: Vec<f64> = dirac_runs.iter().map(|run| run[k].0).collect();
        let orders: Vec<f64> = r.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let worst = orders.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least(format!("dirac residual order, direction {k}"), worst, 1.95));
        dirac_rows.push(json!({ "residuals": r, "orders": orders }));
    }

    // Gaussian ensemble: dt^2 fit on the coarse run, check on the fine run.
    let count = options.draws.unwrap_or(256);
    let gauss = sample_measure(
        &scenarios::reference_gaussian_measure(&sc, 0.1, 0.01),
        count,
        options.seed,
        m.grid(),
    )?;
    let gdts = [0.04, 0.02];
    let gauss_runs: Vec<Vec<(f64, f64)>> = gdts
        .iter()
        .map(|&dt| char_residuals(m, &gauss, t_end, dt, &ys, sigma))
        .collect::<Result<_>>()?;
    let mut gauss_rows = Vec::new();
    for (k, _) in ys.iter().enumerate() {
        let (coarse, _) = gauss_runs[0][k];
        let (fine, stderr) = gauss_runs[1][k];
        let c = coarse / gdts[0].powi(2);
        let bound = 3.0 * stderr + c * gdts[1].powi(2);
        checks.push(Check::at_most(
            format!("gaussian M={count} residual minus (3 stderr + c dt^2), direction {k}"),
            fine - bound,
            0.0,
        ));
        gauss_rows.push(json!({ "coarse": coarse, "fine": fine, "stderr": stderr, "fitted_c": c }));
    }

    // Vanishing vector field: both sides constant.
    let free_spec = ParticleSpec::new(
        vec![1.0; m.particles()],
        vec![FormFactor::gaussian(1.0).with_charge(0.0); m.particles()],
    )?;
    let free = Model::new(m.grid().clone(), free_spec, PotentialSpec::Zero)?;
    let mut still = sc.initial.clone();
    still.particles.p.iter_mut().for_each(|x| *x = 0.0);
    let still = sample_measure(&MeasureSpec::Dirac { center: still }, 1, 0, free.grid())?;
    let trivial = char_residuals(&free, &still, t_end, 0.1, &ys, sigma)?;
    let worst = trivial.iter().map(|r| r.0).fold(0.0, f64::max);
    checks.push(Check::at_most("residual with vanishing vector field", worst, 1e-12));

    Ok(SuiteReport::new(
        Suite::Characteristic,
        checks,
        json!({
            "sigma": sigma,
            "t_end": t_end,
            "dirac": { "dt": dts, "directions": dirac_rows },
            "gaussian": { "samples": count, "dt": gdts, "directions": gauss_rows },
        }),
    ))
}

// -------------------------------------------------------- mvfi identity

fn mvfi_model() -> Result<Model> {
    let grid = KGrid::build(3, 3.0, 8)?;
    let spec = ParticleSpec::new(
        vec![1.0, 2.0, 0.7],
        vec![
            FormFactor::gaussian(1.0),
            FormFactor::gaussian(1.3).with_charge(-0.6),
            FormFactor::ball(2.0).with_charge(0.4),
        ],
    )?;
    Model::new(grid, spec, PotentialSpec::SmearedCoulomb { g: 0.8 })
}

fn mvfi_identity(options: &VerifyOptions) -> Result<SuiteReport> {
    let m = mvfi_model()?;
    let grid = m.grid();
    let draws = options.draws.unwrap_or(100);
    let mut rng = options.rng(13);
    let mut worst: f64 = 0.0;
    let mut worst_literal: f64 = 0.0;
    let mut worst_literal_field_only: f64 = 0.0;
    for _ in 0..draws {
        let s = rng.random_range(-2.0..2.0);
        let u = random_point(grid, m.particles(), DrawScales::default(), &mut rng);
        let xi = random_point(grid, m.particles(), DrawScales::default(), &mut rng);
        let theta = m.vartheta(s, &u);
        let dual = dual_test_point(&xi);
        let rhs = -2.0 * PI * real_inner(grid, &theta, &dual, 0.0)?;
        let scale = 2.0 * PI * x0(grid, &theta) * x0(grid, &dual);
        worst = worst.max((m.characteristic_density_m(s, &xi, &u) - rhs).abs() / scale);
        worst_literal = worst_literal.max((m.characteristic_density_m_literal(s, &xi, &u) - rhs).abs() / scale);

        let mut field_only = xi.clone();
        field_only.particles.p.iter_mut().for_each(|x| *x = 0.0);
        field_only.particles.q.iter_mut().for_each(|x| *x = 0.0);
        let dual = dual_test_point(&field_only);
        let rhs = -2.0 * PI * real_inner(grid, &theta, &dual, 0.0)?;
        let scale = 2.0 * PI * x0(grid, &theta) * x0(grid, &dual);
        worst_literal_field_only = worst_literal_field_only
            .max((m.characteristic_density_m_literal(s, &field_only, &u) - rhs).abs() / scale);
    }

    // Reduction with alpha = 0 and alpha_0 = 0.
    let mut u = random_point(grid, m.particles(), DrawScales::default(), &mut rng);
    u.field = FieldState::zeros(grid);
    let mut xi = random_point(grid, m.particles(), DrawScales::default(), &mut rng);
    xi.field = FieldState::zeros(grid);
    let s = 0.6;
    let d = grid.dim();
    let shifted: Vec<f64> = (0..u.particles.q.len())
        .map(|c| u.particles.q[c] + s * u.particles.p[c] / m.spec().mass(c / d))
        .collect();
    let (_, grad_v) = m.potential(&shifted);
    let pairing: f64 = (0..grad_v.len())
        .map(|c| grad_v[c] * (xi.particles.q[c] + s * xi.particles.p[c] / m.spec().mass(c / d)))
        .sum();
    let reduced = m.characteristic_density_m(s, &xi, &u);
    let reduced_literal = m.characteristic_density_m_literal(s, &xi, &u);

    let zero = m.zero_state();
    let checks = vec![
        Check::at_most("max |m + 2 pi Re<vartheta, xi~>| / scale", worst, 1e-10),
        Check::at_most("m at xi = 0", m.characteristic_density_m(0.3, &zero, &u).abs(), 0.0),
        Check::at_most(
            "alpha = alpha_0 = 0: |m + 2 grad V . Q_0| / |grad V . Q_0|",
            (reduced + 2.0 * pairing).abs() / pairing.abs(),
            1e-12,
        ),
        Check::at_most(
            "literal display, field-only xi: max relative residual",
            worst_literal_field_only,
            1e-10,
        ),
    ];
    Ok(SuiteReport::new(
        Suite::MvfiIdentity,
        checks,
        json!({
            "draws": draws,
            "max_relative_residual": worst,
            "literal_display": {
                "max_relative_residual": worst_literal,
                "max_relative_residual_field_only_xi": worst_literal_field_only,
                "alpha_zero_value": reduced_literal,
                "minus_grad_v_dot_q0": -pairing,
            },
        }),
    ))
}

// -------------------------------------------------------------- moments

fn moments(options: &VerifyOptions) -> Result<SuiteReport> {
    let sc = options.scenario()?;
    let m = &sc.model;
    let grid = m.grid();
    let count = options.draws.unwrap_or(64);
    let (t_end, dt) = (5.0, 0.01);
    let keep = EvolveOptions {
        sample_every: 10,
        keep_states: true,
    };
    let measure = scenarios::reference_gaussian_measure(&sc, 0.2, 0.05);
    let run = |seed: u64| -> Result<_> {
        let e0 = sample_measure(&measure, count, seed, grid)?;
        let e = push_forward(m, &e0, t_end, dt, Scheme::Strang, Some(keep))?;
        moment_report(grid, &e)
    };
    let fit = run(options.seed)?;
    let held_out = run(options.seed.wrapping_add(1))?;
    let bounded_excess = held_out
        .rows
        .iter()
        .filter(|r| r.p4 + r.field_h12_4 > fit.c1 + 3.0 * r.bounded_stderr)
        .count();
    let exp_excess = held_out
        .rows
        .iter()
        .filter(|r| r.field_l2_4 > fit.c2 * (fit.c2 * r.t.abs()).exp() + 3.0 * r.field_l2_4_stderr)
        .count();

    // Free particles with no field: |p|^4 is conserved; free field: norms are conserved.
    let free_spec = ParticleSpec::new(
        vec![1.0; m.particles()],
        vec![FormFactor::gaussian(1.0).with_charge(0.0); m.particles()],
    )?;
    let free = Model::new(grid.clone(), free_spec, PotentialSpec::Zero)?;
    let e0 = sample_measure(&measure, 8, options.seed, grid)?;
    let e = push_forward(&free, &e0, 1.0, 0.1, Scheme::Strang, Some(EvolveOptions { sample_every: 1, keep_states: true }))?;
    let free_rep = moment_report(grid, &e)?;
    let spread = |f: &dyn Fn(&crate::measures::MomentRow) -> f64| {
        let v: Vec<f64> = free_rep.rows.iter().map(f).collect();
        let hi = v.iter().copied().fold(f64::MIN, f64::max);
        let lo = v.iter().copied().fold(f64::MAX, f64::min);
        (hi - lo) / hi.abs().max(1e-300)
    };

    let checks = vec![
        Check::at_most("bounded-moment envelope violations", fit.bounded_violations as f64, 0.0),
        Check::at_most("exponential envelope violations", fit.exponential_violations as f64, 0.0),
        Check::at_most("held-out ensemble: bounded envelope + 3 stderr violations", bounded_excess as f64, 0.0),
        Check::at_most("held-out ensemble: exponential envelope + 3 stderr violations", exp_excess as f64, 0.0),
        Check::at_most("decoupled: relative spread of mean |p|^4", spread(&|r| r.p4), 1e-12),
        Check::at_most("decoupled: relative spread of mean ||alpha||^4_L2", spread(&|r| r.field_l2_4), 1e-12),
    ];
    Ok(SuiteReport::new(
        Suite::Moments,
        checks,
        json!({ "samples": count, "t_end": t_end, "dt": dt, "fit": fit, "held_out": { "c1": held_out.c1, "c2": held_out.c2 } }),
    ))
}

// ----------------------------------------------------- frame covariance

/// `alpha'_lambda = sum_mu R[mu][lambda] alpha_mu` at every node.
fn rotate_field(field: &FieldState, rotations: &[Vec<f64>], inverse: bool) -> FieldState {
    let m = field.polarizations();
    let mut out = field.clone();
    for (j, r) in rotations.iter().enumerate() {
        let modes = field.modes(j);
        for lambda in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for mu in 0..m {
                let coef = if inverse { r[lambda * m + mu] } else { r[mu * m + lambda] };
                acc += modes[mu] * coef;
            }
            out.values[j * m + lambda] = acc;
        }
    }
    out
}

fn frame_covariance(options: &VerifyOptions) -> Result<SuiteReport> {
    let base = mvfi_model()?;
    let grid = base.grid().clone();
    let draws = options.draws.unwrap_or(20);
    let mut rng = options.rng(17);
    let rotations: Vec<Vec<f64>> = (0..grid.len())
        .map(|_| orthogonal_matrix(grid.polarizations(), &mut rng))
        .collect();
    let rotated_basis = base.basis().transformed(|j| rotations[j].clone());
    let rotated = base.clone().with_basis(rotated_basis)?;

    let (mut a_err, mut h_err, mut f_err, mut m_err): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..draws {
        let u = random_point(&grid, base.particles(), DrawScales::default(), &mut rng);
        let xi = random_point(&grid, base.particles(), DrawScales::default(), &mut rng);
        let mut u_r = u.clone();
        u_r.field = rotate_field(&u.field, &rotations, false);
        let mut xi_r = xi.clone();
        xi_r.field = rotate_field(&xi.field, &rotations, false);

        for i in 0..base.particles() {
            let a = base.vector_potential_jet(i, u.particles.q_of(i), &u.field);
            let b = rotated.vector_potential_jet(i, u.particles.q_of(i), &u_r.field);
            let scale = norm(&a.value) + norm(&a.jacobian);
            let diff: Vec<f64> = a
                .value
                .iter()
                .chain(&a.jacobian)
                .zip(b.value.iter().chain(&b.jacobian))
                .map(|(x, y)| x - y)
                .collect();
            a_err = a_err.max(norm(&diff) / scale);
        }
        let h = base.hamiltonian(&u);
        h_err = h_err.max((h - rotated.hamiltonian(&u_r)).abs() / h.abs());

        let f = base.nonlinearity_f(&u);
        let mut g = rotated.nonlinearity_f(&u_r);
        g.field = rotate_field(&g.field, &rotations, true);
        f_err = f_err.max(x0(&grid, &f.sub(&g)) / x0(&grid, &f));

        let s = rng.random_range(-1.0..1.0);
        let m0 = base.characteristic_density_m(s, &xi, &u);
        let m1 = rotated.characteristic_density_m(s, &xi_r, &u_r);
        let dual = dual_test_point(&xi);
        let scale = 2.0 * PI * x0(&grid, &base.vartheta(s, &u)) * x0(&grid, &dual);
        m_err = m_err.max((m0 - m1).abs() / scale);
    }
    let checks = vec![
        Check::at_most("A and grad A relative change", a_err, 1e-12),
        Check::at_most("H relative change", h_err, 1e-12),
        Check::at_most("F relative change (X0)", f_err, 1e-12),
        Check::at_most("m(s, xi) relative change", m_err, 1e-12),
    ];
    Ok(SuiteReport::new(Suite::FrameCovariance, checks, json!({ "draws": draws })))
}

/// Runs every suite and returns the reports in [`Suite::ALL`] order.
pub fn run_all(options: &VerifyOptions) -> Result<Vec<SuiteReport>> {
    Suite::ALL.iter().map(|&s| run_suite(s, options)).collect()
}

/// Maps a suite failure to an error carrying its table.
pub fn require(report: &SuiteReport) -> Result<()> {
    if report.passed {
        Ok(())
    } else {
        Err(Error::InvalidArgument(report.table()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::draws::random_field;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::from_name(s.name()), Some(s));
        }
        assert_eq!(Suite::from_name("nope"), None);
    }

    #[test]
    fn check_relations() {
        assert!(Check::at_most("x", 1.0, 1.0).passed);
        assert!(!Check::at_least("x", 0.5, 1.0).passed);
        assert!(Check::near("x", 4.3, 4.0, 0.8).passed);
        assert!(!Check::near("x", 16.0, 4.0, 0.8).passed);
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
    }

    #[test]
    fn field_rotation_round_trips() {
        let grid = KGrid::build(3, 1.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rot: Vec<Vec<f64>> = (0..grid.len()).map(|_| orthogonal_matrix(2, &mut rng)).collect();
        let f = random_field(&grid, 1.0, 1.0, &mut rng);
        let back = rotate_field(&rotate_field(&f, &rot, false), &rot, true);
        for (a, b) in f.values.iter().zip(&back.values) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
