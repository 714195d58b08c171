//! Run configuration: an optional TOML file overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use trajopt::solvers::{SolverConfig, SolverKind};

use crate::problems::EnvKind;

/// One solver name or a list of them.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SolverList {
    One(String),
    Many(Vec<String>),
}

impl SolverList {
    pub fn names(&self) -> Vec<String> {
        match self {
            Self::One(name) => vec![name.clone()],
            Self::Many(names) => names.clone(),
        }
    }
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub env: Option<String>,
    pub solver: Option<SolverList>,
    pub tau: Option<usize>,
    pub eps: Option<f64>,
    pub gamma0: Option<f64>,
    pub rho: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub plot: Option<bool>,
    pub samples: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `over` replace those of `self`.
    pub fn merged(self, over: FileConfig) -> Self {
        Self {
            env: over.env.or(self.env),
            solver: over.solver.or(self.solver),
            tau: over.tau.or(self.tau),
            eps: over.eps.or(self.eps),
            gamma0: over.gamma0.or(self.gamma0),
            rho: over.rho.or(self.rho),
            max_iter: over.max_iter.or(self.max_iter),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            plot: over.plot.or(self.plot),
            samples: over.samples.or(self.samples),
        }
    }
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub tau: Option<usize>,
    pub solvers: Vec<SolverKind>,
    pub solver: SolverConfig,
    pub out: PathBuf,
    pub plot: bool,
    pub seed: u64,
    pub samples: usize,
}

impl RunConfig {
    /// Resolve names and defaults. `default_solvers` is used when none is given.
    pub fn resolve(file: FileConfig, default_solvers: &[SolverKind]) -> Result<Self> {
        let env: EnvKind = file.env.as_deref().unwrap_or("pendulum").parse()?;
        let solvers = match &file.solver {
            Some(list) => list
                .names()
                .iter()
                .map(|name| name.parse::<SolverKind>().map_err(anyhow::Error::from))
                .collect::<Result<Vec<_>>>()?,
            None => default_solvers.to_vec(),
        };
        let seed = file.seed.unwrap_or(0);
        let defaults = SolverConfig::default();
        let solver = SolverConfig {
            max_iterations: file.max_iter.unwrap_or(defaults.max_iterations),
            tolerance: file.eps.unwrap_or(defaults.tolerance),
            gamma0: file.gamma0.unwrap_or_else(|| env.default_gamma0()),
            rho: file.rho.unwrap_or(defaults.rho),
            seed,
            ..defaults
        };
        solver.validate()?;
        if file.tau == Some(0) {
            bail!("tau must be positive");
        }
        let samples = file.samples.unwrap_or(5);
        if samples == 0 {
            bail!("samples must be positive");
        }
        Ok(Self {
            env,
            tau: file.tau,
            solvers,
            solver,
            out: file.out.unwrap_or_else(|| PathBuf::from("out")),
            plot: file.plot.unwrap_or(false),
            seed,
            samples,
        })
    }
}
