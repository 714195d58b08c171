//! Command-line harness for the trajopt solvers: single runs, side-by-side
//! comparisons with CSV traces and SVG plots, and gradient checks.

pub mod commands;
pub mod config;
pub mod plot;
pub mod problems;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{FileConfig, RunConfig, SolverList};
use trajopt::solvers::SolverKind;

#[derive(Debug, Parser)]
#[command(name = "trajopt", version, about = "Trajectory optimization benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run one solver and write its convergence trace.
    Solve(RunArgs),
    /// Run several solvers on the same problem and plot them together.
    Compare(RunArgs),
    /// Compare the oracle gradient with central finite differences.
    CheckGrad(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with defaults for the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// pendulum, two_link_arm or random_lq.
    #[arg(long)]
    pub env: Option<String>,
    /// Solver name; repeat or separate with commas for compare.
    #[arg(long, value_delimiter = ',')]
    pub solver: Vec<String>,
    /// Number of time steps.
    #[arg(long)]
    pub tau: Option<usize>,
    /// Gradient-norm tolerance.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub gamma0: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "TRAJOPT_OUT")]
    pub out: Option<PathBuf>,
    /// Write SVG plots.
    #[arg(long)]
    pub plot: bool,
    /// Random commands drawn by check-grad.
    #[arg(long)]
    pub samples: Option<usize>,
}

impl RunArgs {
    fn as_overrides(&self) -> FileConfig {
        FileConfig {
            env: self.env.clone(),
            solver: (!self.solver.is_empty()).then(|| SolverList::Many(self.solver.clone())),
            tau: self.tau,
            eps: self.eps,
            gamma0: self.gamma0,
            rho: self.rho,
            max_iter: self.max_iter,
            seed: self.seed,
            out: self.out.clone(),
            plot: self.plot.then_some(true),
            samples: self.samples,
        }
    }

    pub fn resolve(&self, default_solvers: &[SolverKind]) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        RunConfig::resolve(file.merged(self.as_overrides()), default_solvers)
    }
}

/// Default solver set of `compare`.
pub const COMPARE_DEFAULT: [SolverKind; 3] = [SolverKind::Ilqr, SolverKind::RegIlqr, SolverKind::AccRegIlqr];

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Cmd::Solve(args) => commands::solve(&args.resolve(&[SolverKind::RegIlqr])?),
        Cmd::Compare(args) => commands::compare(&args.resolve(&COMPARE_DEFAULT)?),
        Cmd::CheckGrad(args) => commands::check_grad(&args.resolve(&[])?),
    }
}
