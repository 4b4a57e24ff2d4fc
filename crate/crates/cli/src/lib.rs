//! Command-line driver: configuration loading, the four subcommands and
//! their output files.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "nmdyn", version, about = "Newton-Maxwell dynamics of extended charges")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "NMDYN_THREADS")]
    pub threads: Option<usize>,
    /// Output directory; all written paths are relative to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run even when the form factors fail the integrability hypotheses.
    #[arg(long, global = true)]
    pub allow_flagged: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve one initial state and write its trajectory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample the initial measure, push it forward and write moment and
    /// characteristic-function reports.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a verification suite.
    Verify {
        /// Suite name, or `all`.
        suite: String,
        /// Scenario for the dynamical suites; the built-in reference otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of random draws for the sampling suites.
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Evaluate the form-factor hypotheses of a configuration.
    Hypotheses {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code(&e)
        }
    }
}
