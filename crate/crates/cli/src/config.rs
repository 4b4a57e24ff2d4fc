//! Scenario configuration files.
//!
//! Parsing is two-staged: serde enforces the shape of the document and
//! reports the offending path, then [`ScenarioConfig::resolve`] checks the
//! cross-references and builds library objects.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use nmdyn::integrator::Scheme;
use nmdyn::interaction::{FormFactorShape, RadialTable};
use nmdyn::measures::{FieldMode, MeasureSpec};
use nmdyn::{
    FieldState, FormFactor, GridParams, KGrid, Model, ParticleSpec, ParticleState, PhaseSpacePoint,
    PotentialSpec, QuadratureRule,
};

/// A configuration problem, located by a JSON path such as `particles[1].mass`.
#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Self {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub particles: Vec<ParticleConfig>,
    #[serde(default)]
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    /// Output directory; the `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    #[serde(rename = "K")]
    pub cutoff: f64,
    #[serde(rename = "N")]
    pub nodes_per_axis: usize,
    #[serde(default)]
    pub rule: QuadratureRule,
    #[serde(default)]
    pub origin_refinement: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    pub mass: f64,
    pub form_factor: FormFactorConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FormFactorConfig {
    Gaussian {
        width: f64,
        #[serde(default = "unit_charge")]
        charge: f64,
    },
    Ball {
        radius: f64,
        #[serde(default = "unit_charge")]
        charge: f64,
    },
    /// Two-column CSV `r,chi(r)`; the path is relative to the config file.
    Table {
        path: PathBuf,
        #[serde(default = "unit_charge")]
        charge: f64,
    },
    Point {
        #[serde(default = "unit_charge")]
        charge: f64,
    },
}

fn unit_charge() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    #[default]
    Zero,
    SmearedCoulomb { g: f64 },
    CosProduct { amplitude: f64, wavevector: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointConfig {
    /// Explicit node values in grid order, `index = node * (d - 1) + polarization`.
    Inline {
        p: Vec<Vec<f64>>,
        q: Vec<Vec<f64>>,
        alpha_re: Vec<f64>,
        alpha_im: Vec<f64>,
    },
    /// A state file, or a `simulate` summary whose `final_state` is used; the
    /// path is relative to the config file.
    File { path: PathBuf },
    /// `alpha_lambda(k) = amplitude * e^{-|k|^2 / (2 width^2)} * e^{i k . phase}`
    /// on every polarization.
    Profile {
        p: Vec<Vec<f64>>,
        q: Vec<Vec<f64>>,
        #[serde(default)]
        amplitude: f64,
        #[serde(default = "unit_width")]
        width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<Vec<f64>>,
    },
}

fn unit_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    Dirac {
        center: PointConfig,
    },
    Gaussian {
        center: PointConfig,
        particle_scale: f64,
        #[serde(default)]
        modes: Vec<ModeConfig>,
        /// Perturbs every polarization of every node with `|k| <= max_norm`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shell: Option<ShellConfig>,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub node: usize,
    pub polarization: usize,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellConfig {
    pub max_norm: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub measure: MeasureConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    State(PointConfig),
    Measure(MeasureConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "unit_every")]
    pub snapshot_every: usize,
    /// Sobolev index for the hypothesis check.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_scheme() -> Scheme {
    Scheme::Strang
}

fn unit_every() -> usize {
    1
}

fn default_sigma() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(rename = "M")]
    pub samples: usize,
    pub seed: u64,
    /// Number of random test directions for the characteristic-function report.
    #[serde(default = "default_directions")]
    pub test_directions: usize,
}

fn default_directions() -> usize {
    3
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            seed: 0,
            test_directions: default_directions(),
        }
    }
}

/// Library objects built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: Model,
    pub initial: Initial,
}

#[derive(Debug, Clone)]
pub enum Initial {
    Point(PhaseSpacePoint),
    Measure(MeasureSpec),
}

impl Initial {
    pub fn measure(&self) -> MeasureSpec {
        match self {
            Initial::Point(u) => MeasureSpec::Dirac { center: u.clone() },
            Initial::Measure(m) => m.clone(),
        }
    }
}

/// A parsed configuration with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::at("$", format!("cannot read {}: {e}", path.display())))?;
        let config = ScenarioConfig::parse(&text)?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self { config, base_dir })
    }

    pub fn resolve(&self) -> ConfigResult<Resolved> {
        self.config.resolve(&self.base_dir)
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> ConfigResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::at(if path == "." { "$".into() } else { path }, e.into_inner())
        })
    }

    pub fn resolve(&self, base_dir: &Path) -> ConfigResult<Resolved> {
        let grid = self.grid.build()?;
        let spec = self.particle_spec(base_dir)?;
        let potential = self.potential.build(grid.dim())?;
        self.run.validate()?;
        if self.ensemble.samples == 0 {
            return Err(ConfigError::at("ensemble.M", "must be positive"));
        }
        let model = Model::new(grid, spec, potential).map_err(|e| ConfigError::at("$", e))?;
        let n = model.particles();
        let initial = match &self.initial {
            InitialConfig::State(p) => Initial::Point(p.build(&model, n, base_dir, "initial.state")?),
            InitialConfig::Measure(m) => {
                Initial::Measure(m.build(&model, n, base_dir, "initial.measure")?)
            }
        };
        Ok(Resolved { model, initial })
    }

    fn particle_spec(&self, base_dir: &Path) -> ConfigResult<ParticleSpec> {
        if self.particles.is_empty() {
            return Err(ConfigError::at("particles", "at least one particle is required"));
        }
        let mut masses = Vec::new();
        let mut form_factors = Vec::new();
        for (i, p) in self.particles.iter().enumerate() {
            if !(p.mass.is_finite() && p.mass > 0.0) {
                return Err(ConfigError::at(format!("particles[{i}].mass"), "must be positive and finite"));
            }
            masses.push(p.mass);
            form_factors.push(p.form_factor.build(base_dir, &format!("particles[{i}].form_factor"))?);
        }
        ParticleSpec::new(masses, form_factors).map_err(|e| ConfigError::at("particles", e))
    }
}

impl GridConfig {
    pub fn params(&self) -> GridParams {
        GridParams::uniform(self.d, self.cutoff, self.nodes_per_axis)
            .with_rule(self.rule, self.origin_refinement)
    }

    fn build(&self) -> ConfigResult<KGrid> {
        if self.d < 2 {
            return Err(ConfigError::at("grid.d", "must be at least 2"));
        }
        if !(self.cutoff.is_finite() && self.cutoff > 0.0) {
            return Err(ConfigError::at("grid.K", "must be positive and finite"));
        }
        if self.nodes_per_axis == 0 {
            return Err(ConfigError::at("grid.N", "must be positive"));
        }
        KGrid::with_params(self.params()).map_err(|e| ConfigError::at("grid", e))
    }
}

impl FormFactorConfig {
    fn build(&self, base_dir: &Path, path: &str) -> ConfigResult<FormFactor> {
        let (shape, charge) = match self {
            FormFactorConfig::Gaussian { width, charge } => {
                (FormFactorShape::Gaussian { width: *width }, *charge)
            }
            FormFactorConfig::Ball { radius, charge } => {
                (FormFactorShape::Ball { radius: *radius }, *charge)
            }
            FormFactorConfig::Point { charge } => (FormFactorShape::Point, *charge),
            FormFactorConfig::Table { path: table, charge } => {
                let full = base_dir.join(table);
                let file = fs::File::open(&full).map_err(|e| {
                    ConfigError::at(format!("{path}.path"), format!("cannot open {}: {e}", full.display()))
                })?;
                let table = RadialTable::from_csv(file)
                    .map_err(|e| ConfigError::at(format!("{path}.path"), e))?;
                (FormFactorShape::Table(table), *charge)
            }
        };
        FormFactor::new(shape, charge).map_err(|e| ConfigError::at(path, e))
    }
}

impl PotentialConfig {
    fn build(&self, d: usize) -> ConfigResult<PotentialSpec> {
        let spec = match self {
            PotentialConfig::Zero => PotentialSpec::Zero,
            PotentialConfig::SmearedCoulomb { g } => PotentialSpec::SmearedCoulomb { g: *g },
            PotentialConfig::CosProduct {
                amplitude,
                wavevector,
            } => PotentialSpec::CosProduct {
                amplitude: *amplitude,
                wavevector: wavevector.clone(),
            },
        };
        spec.validate(d).map_err(|e| ConfigError::at("potential", e))?;
        Ok(spec)
    }
}

impl RunConfig {
    fn validate(&self) -> ConfigResult<()> {
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(ConfigError::at("run.T", "must be finite and non-negative"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ConfigError::at("run.dt", "must be positive and finite"));
        }
        nmdyn::integrator::step_count(self.t_end, self.dt)
            .map_err(|e| ConfigError::at("run.dt", e))?;
        if self.snapshot_every == 0 {
            return Err(ConfigError::at("run.snapshot_every", "must be positive"));
        }
        if !(0.5..=1.0).contains(&self.sigma) {
            return Err(ConfigError::at("run.sigma", "must lie in [0.5, 1]"));
        }
        Ok(())
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
}

fn check_vectors(vs: &[Vec<f64>], n: usize, d: usize, path: &str) -> ConfigResult<Vec<f64>> {
    if vs.len() != n {
        return Err(ConfigError::at(path, format!("expected {n} particle vectors, found {}", vs.len())));
    }
    for (i, v) in vs.iter().enumerate() {
        if v.len() != d {
            return Err(ConfigError::at(format!("{path}[{i}]"), format!("expected {d} components, found {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ConfigError::at(format!("{path}[{i}]"), "non-finite component"));
        }
    }
    Ok(vs.concat())
}

impl PointConfig {
    fn build(&self, model: &Model, n: usize, base_dir: &Path, path: &str) -> ConfigResult<PhaseSpacePoint> {
        let grid = model.grid();
        let d = grid.dim();
        let u = match self {
            PointConfig::Inline {
                p,
                q,
                alpha_re,
                alpha_im,
            } => {
                let p = check_vectors(p, n, d, &format!("{path}.p"))?;
                let q = check_vectors(q, n, d, &format!("{path}.q"))?;
                let expected = grid.len() * grid.polarizations();
                for (name, v) in [("alpha_re", alpha_re), ("alpha_im", alpha_im)] {
                    if v.len() != expected {
                        return Err(ConfigError::at(
                            format!("{path}.{name}"),
                            format!("grid has {expected} field values, found {}", v.len()),
                        ));
                    }
                }
                let values = alpha_re
                    .iter()
                    .zip(alpha_im)
                    .map(|(&re, &im)| Complex64::new(re, im))
                    .collect();
                let field = FieldState::new(grid, values).map_err(|e| ConfigError::at(path, e))?;
                let particles = ParticleState::new(d, p, q).map_err(|e| ConfigError::at(path, e))?;
                PhaseSpacePoint::new(particles, field)
            }
            PointConfig::File { path: file } => {
                let full = base_dir.join(file);
                let text = fs::read_to_string(&full).map_err(|e| {
                    ConfigError::at(format!("{path}.path"), format!("cannot read {}: {e}", full.display()))
                })?;
                let mut doc: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| ConfigError::at(format!("{path}.path"), e))?;
                if let Some(inner) = doc.get_mut("final_state") {
                    doc = inner.take();
                }
                let state: nmdyn::state::StateFile = serde_json::from_value(doc)
                    .map_err(|e| ConfigError::at(format!("{path}.path"), e))?;
                let u = PhaseSpacePoint::from_json(&state, grid)
                    .map_err(|e| ConfigError::at(format!("{path}.path"), e))?;
                if u.count() != n {
                    return Err(ConfigError::at(
                        format!("{path}.path"),
                        format!("state has {} particles, config declares {n}", u.count()),
                    ));
                }
                u
            }
            PointConfig::Profile {
                p,
                q,
                amplitude,
                width,
                phase,
            } => {
                let p = check_vectors(p, n, d, &format!("{path}.p"))?;
                let q = check_vectors(q, n, d, &format!("{path}.q"))?;
                if !(width.is_finite() && *width > 0.0) {
                    return Err(ConfigError::at(format!("{path}.width"), "must be positive"));
                }
                if !amplitude.is_finite() {
                    return Err(ConfigError::at(format!("{path}.amplitude"), "must be finite"));
                }
                let phase = match phase {
                    Some(v) if v.len() != d => {
                        return Err(ConfigError::at(
                            format!("{path}.phase"),
                            format!("expected {d} components, found {}", v.len()),
                        ))
                    }
                    Some(v) => v.clone(),
                    None => vec![0.0; d],
                };
                let field = FieldState::from_fn(grid, |j, _| {
                    let r = grid.norm(j);
                    let arg: f64 = grid.node(j).iter().zip(&phase).map(|(k, x)| k * x).sum();
                    Complex64::from_polar(amplitude * (-0.5 * r * r / (width * width)).exp(), arg)
                });
                let particles = ParticleState::new(d, p, q).map_err(|e| ConfigError::at(path, e))?;
                PhaseSpacePoint::new(particles, field)
            }
        };
        Ok(u)
    }
}

impl MeasureConfig {
    fn build(&self, model: &Model, n: usize, base_dir: &Path, path: &str) -> ConfigResult<MeasureSpec> {
        let grid = model.grid();
        let spec = match self {
            MeasureConfig::Dirac { center } => MeasureSpec::Dirac {
                center: center.build(model, n, base_dir, &format!("{path}.center"))?,
            },
            MeasureConfig::Gaussian {
                center,
                particle_scale,
                modes,
                shell,
            } => {
                let center = center.build(model, n, base_dir, &format!("{path}.center"))?;
                let mut list: Vec<FieldMode> = modes
                    .iter()
                    .map(|m| FieldMode {
                        node: m.node,
                        polarization: m.polarization,
                        variance: m.variance,
                    })
                    .collect();
                if let Some(shell) = shell {
                    for j in 0..grid.len() {
                        if grid.norm(j) <= shell.max_norm {
                            for polarization in 0..grid.polarizations() {
                                list.push(FieldMode {
                                    node: j,
                                    polarization,
                                    variance: shell.variance,
                                });
                            }
                        }
                    }
                }
                MeasureSpec::Gaussian {
                    center,
                    particle_scale: *particle_scale,
                    modes: list,
                }
            }
            MeasureConfig::Mixture { components } => {
                let parts = components
                    .iter()
                    .enumerate()
                    .map(|(c, comp)| {
                        Ok((
                            comp.weight,
                            comp.measure
                                .build(model, n, base_dir, &format!("{path}.components[{c}].measure"))?,
                        ))
                    })
                    .collect::<ConfigResult<Vec<_>>>()?;
                MeasureSpec::Mixture(parts)
            }
        };
        spec.validate(grid).map_err(|e| ConfigError::at(path, e))?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"d": 3, "K": 1.0, "N": 4},
        "particles": [{"mass": 1.0, "form_factor": {"family": "gaussian", "width": 1.0}}],
        "initial": {"state": {"source": "profile", "p": [[0.1, 0, 0]], "q": [[0, 0, 0]], "amplitude": 0.1}},
        "run": {"T": 0.1, "dt": 0.01}
    }"#;

    #[test]
    fn minimal_config_resolves() {
        let cfg = ScenarioConfig::parse(MINIMAL).unwrap();
        let r = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(r.model.particles(), 1);
        assert!(matches!(r.initial, Initial::Point(_)));
    }

    #[test]
    fn unknown_field_reports_path() {
        let text = MINIMAL.replace("\"width\": 1.0}", "\"width\": 1.0, \"colour\": 2}");
        let err = ScenarioConfig::parse(&text).unwrap_err();
        assert!(err.path.starts_with("particles[0].form_factor"), "{}", err.path);
    }

    #[test]
    fn vector_length_mismatch_is_located() {
        let text = MINIMAL.replace("\"p\": [[0.1, 0, 0]]", "\"p\": [[0.1, 0]]");
        let cfg = ScenarioConfig::parse(&text).unwrap();
        let err = cfg.resolve(Path::new(".")).unwrap_err();
        assert_eq!(err.path, "initial.state.p[0]");
    }

    #[test]
    fn indivisible_duration_is_rejected() {
        let text = MINIMAL.replace("\"dt\": 0.01", "\"dt\": 0.03");
        let err = ScenarioConfig::parse(&text).unwrap().resolve(Path::new(".")).unwrap_err();
        assert_eq!(err.path, "run.dt");
    }
}
