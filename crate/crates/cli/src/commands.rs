use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use nmdyn::integrator::{evolve, EvolveOptions};
use nmdyn::interaction::HypothesisReport;
use nmdyn::measures::{characteristic_residual, moment_report, push_forward, sample_measure};
use nmdyn::scenarios::Scenario;
use nmdyn::verify::{run_suite, test_directions, Suite, SuiteReport, VerifyOptions};
use nmdyn::Model;

use crate::config::{ConfigError, Initial, LoadedConfig, Resolved};
use crate::output::OutputDir;
use crate::{Cli, Command, CommonArgs};

/// Failures with a dedicated exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(ConfigError),
    #[error("{0}; pass --allow-flagged to run anyway")]
    Flagged(String),
    #[error("numerical abort: {0}")]
    NonFinite(String),
    #[error("verification failed: {0}")]
    SuiteFailed(String),
    #[error("{0}")]
    Usage(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Flagged(_) | CliError::Usage(_) => 2,
            CliError::SuiteFailed(_) => 1,
            CliError::NonFinite(_) => 3,
        }
    }
}

pub fn exit_code(e: &anyhow::Error) -> i32 {
    e.downcast_ref::<CliError>().map_or(1, CliError::code)
}

/// Routes library failures that have dedicated exit codes.
fn lift(e: nmdyn::Error) -> anyhow::Error {
    match e.root() {
        nmdyn::Error::NonFinite { .. } => CliError::NonFinite(e.to_string()).into(),
        nmdyn::Error::HypothesisFlagged { .. } => CliError::Flagged(e.to_string()).into(),
        _ => e.into(),
    }
}

pub const DEFAULT_OUT: &str = "nmdyn-out";

pub fn run(cli: &Cli) -> Result<i32> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()).into());
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("cannot start worker pool")?;
    pool.install(|| match &cli.command {
        Command::Simulate { config } => simulate(config, &cli.common),
        Command::Ensemble { config } => ensemble(config, &cli.common),
        Command::Verify {
            suite,
            config,
            draws,
        } => verify(suite, config.as_deref(), *draws, &cli.common),
        Command::Hypotheses { config } => hypotheses(config, &cli.common),
    })
}

struct Prepared {
    loaded: LoadedConfig,
    resolved: Resolved,
    out: OutputDir,
}

fn prepare(path: &Path, common: &CommonArgs, command: &'static str) -> Result<Prepared> {
    let mut loaded = LoadedConfig::load(path).map_err(CliError::from)?;
    if let Some(seed) = common.seed {
        loaded.config.ensemble.seed = seed;
    }
    let resolved = loaded.resolve().map_err(CliError::from)?;
    let root = out_dir(common, loaded.config.output.as_deref());
    let out = OutputDir::new(&root, command, serde_json::to_value(&loaded.config)?);
    Ok(Prepared {
        loaded,
        resolved,
        out,
    })
}

fn out_dir(common: &CommonArgs, configured: Option<&Path>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| configured.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Hypothesis report, refusing flagged specs unless overridden.
fn admit(model: &Model, sigma: f64, common: &CommonArgs) -> Result<HypothesisReport> {
    let report = model.check_hypotheses(sigma).map_err(lift)?;
    if let Err(e) = report.ensure_admissible() {
        if common.allow_flagged {
            eprintln!("warning: {e}");
        } else {
            return Err(lift(e));
        }
    }
    Ok(report)
}

fn simulate(path: &Path, common: &CommonArgs) -> Result<i32> {
    let Prepared {
        loaded, resolved, out, ..
    } = prepare(path, common, "simulate")?;
    let run = &loaded.config.run;
    let model = &resolved.model;
    let hypotheses = admit(model, run.sigma, common)?;
    let u0 = match &resolved.initial {
        Initial::Point(u) => u.clone(),
        Initial::Measure(nmdyn::measures::MeasureSpec::Dirac { center }) => center.clone(),
        Initial::Measure(_) => {
            return Err(CliError::Config(ConfigError {
                path: "initial".into(),
                message: "simulate needs a state or a dirac measure; use `ensemble` for other measures".into(),
            })
            .into())
        }
    };
    let traj = evolve(
        model,
        &u0,
        run.t_end,
        run.dt,
        run.scheme,
        EvolveOptions {
            sample_every: run.snapshot_every,
            keep_states: false,
        },
    )
    .map_err(lift)?;

    out.write_csv("trajectory.csv", |w| Ok(traj.write_csv(w)?))?;
    let h0 = model.hamiltonian(&u0);
    let drift = traj
        .samples
        .iter()
        .map(|s| (s.diagnostics.hamiltonian - h0).abs())
        .fold(0.0, f64::max)
        / h0.abs().max(f64::MIN_POSITIVE);
    #[derive(Serialize)]
    struct Summary<'a> {
        scheme: &'static str,
        dt: f64,
        steps: usize,
        t_end: f64,
        hamiltonian_initial: f64,
        hamiltonian_final: f64,
        max_relative_energy_drift: f64,
        hypotheses: &'a HypothesisReport,
        final_state: nmdyn::state::StateFile,
    }
    let summary = Summary {
        scheme: traj.scheme.name(),
        dt: traj.dt,
        steps: traj.steps,
        t_end: traj.end_time(),
        hamiltonian_initial: h0,
        hamiltonian_final: model.hamiltonian(&traj.final_state),
        max_relative_energy_drift: drift,
        hypotheses: &hypotheses,
        final_state: traj.final_state.to_json(model.grid()),
    };
    out.write_json("summary.json", &summary)?;
    println!(
        "simulated {} steps to t = {}; max relative energy drift {:.3e}; output in {}",
        traj.steps,
        traj.end_time(),
        drift,
        out.path("").display()
    );
    Ok(0)
}

fn ensemble(path: &Path, common: &CommonArgs) -> Result<i32> {
    let Prepared {
        loaded, resolved, out, ..
    } = prepare(path, common, "ensemble")?;
    let cfg = &loaded.config;
    let run = &cfg.run;
    let model = &resolved.model;
    admit(model, run.sigma, common)?;
    let grid = model.grid();
    let measure = resolved.initial.measure();
    let e0 = sample_measure(&measure, cfg.ensemble.samples, cfg.ensemble.seed, grid).map_err(lift)?;
    let keep = EvolveOptions {
        sample_every: run.snapshot_every,
        keep_states: true,
    };
    let e = push_forward(model, &e0, run.t_end, run.dt, run.scheme, Some(keep)).map_err(lift)?;
    out.write_csv("ensemble.csv", |w| Ok(e.write_csv(w)?))?;

    let moments = moment_report(grid, &e).map_err(lift)?;
    out.write_json("moments.json", &moments)?;

    let ys = test_directions(model, cfg.ensemble.test_directions, 0.3, cfg.ensemble.seed);
    let residuals = ys
        .iter()
        .map(|y| characteristic_residual(model, &e, y, 0.0, run.t_end, run.sigma))
        .collect::<nmdyn::Result<Vec<_>>>()
        .map_err(lift)?;
    out.write_json(
        "characteristic.json",
        &json!({
            "sigma": run.sigma,
            "directions": ys.iter().map(|y| y.to_json(grid)).collect::<Vec<_>>(),
            "residuals": residuals,
        }),
    )?;
    println!(
        "pushed {} samples to t = {}; c1 = {:.6e}, c2 = {:.6e}; output in {}",
        e.len(),
        e.time,
        moments.c1,
        moments.c2,
        out.path("").display()
    );
    Ok(0)
}

fn verify(name: &str, config: Option<&Path>, draws: Option<usize>, common: &CommonArgs) -> Result<i32> {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        let suite = Suite::from_name(name).ok_or_else(|| {
            let known: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
            CliError::Usage(format!("unknown suite {name:?}; known suites: {}, all", known.join(", ")))
        })?;
        vec![suite]
    };

    let mut options = VerifyOptions {
        draws,
        ..VerifyOptions::default()
    };
    let (config_value, root) = match config {
        Some(path) => {
            let Prepared {
                loaded, resolved, out, ..
            } = prepare(path, common, "verify")?;
            admit(&resolved.model, loaded.config.run.sigma, common)?;
            let initial = match resolved.initial {
                Initial::Point(u) => u,
                Initial::Measure(nmdyn::measures::MeasureSpec::Dirac { center }) => center,
                Initial::Measure(nmdyn::measures::MeasureSpec::Gaussian { center, .. }) => center,
                Initial::Measure(_) => {
                    return Err(CliError::Config(ConfigError {
                        path: "initial".into(),
                        message: "verify needs a state or a centred measure".into(),
                    })
                    .into())
                }
            };
            options.scenario = Some(Scenario {
                model: resolved.model,
                initial,
            });
            if common.seed.is_none() {
                options.seed = loaded.config.ensemble.seed;
            }
            (serde_json::to_value(&loaded.config)?, out.path(""))
        }
        None => (Value::Null, out_dir(common, None)),
    };
    if let Some(seed) = common.seed {
        options.seed = seed;
    }
    let out = OutputDir::new(&root, "verify", config_value);

    let mut failed = Vec::new();
    for suite in suites {
        let report: SuiteReport = run_suite(suite, &options).map_err(lift)?;
        print!("{}", report.table());
        out.write_json(&format!("verify-{}.json", suite.name()), &json!({ "seed": options.seed, "report": report }))?;
        if !report.passed {
            failed.push(suite.name());
        }
    }
    if failed.is_empty() {
        Ok(0)
    } else {
        Err(CliError::SuiteFailed(failed.join(", ")).into())
    }
}

fn hypotheses(path: &Path, common: &CommonArgs) -> Result<i32> {
    let Prepared {
        loaded, resolved, out, ..
    } = prepare(path, common, "hypotheses")?;
    let report = resolved
        .model
        .check_hypotheses(loaded.config.run.sigma)
        .map_err(lift)?;
    out.write_json("hypotheses.json", &report)?;
    for p in &report.particles {
        let status = if p.flagged() { "FLAGGED" } else { "ok" };
        println!("particle {} ({}): {status}", p.particle, p.family);
        for n in &p.norms {
            println!(
                "  {:?}: {:.6e} (refined {:.6e}){}",
                n.norm,
                n.value,
                n.refined_value,
                if n.divergent { " divergent" } else { "" }
            );
        }
    }
    Ok(0)
}
