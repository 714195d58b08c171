//! The `solve`, `compare` and `check-grad` subcommands.

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::thread;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trajopt::fd;
use trajopt::solvers::{ConvergenceRecord, SolverConfig, SolverKind, Termination};
use trajopt::{Command, ControlProblem, DerivativeOrder, Oracle};

use crate::config::RunConfig;
use crate::plot::{write_comparison_plot, write_trace_plot, Quantity};

/// Largest relative gradient error accepted by `check-grad`.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

/// Process exit status of a subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failure,
    NotConverged,
    GradientMismatch,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Self::Success => 0,
            Self::Failure => 1,
            Self::NotConverged => 2,
            Self::GradientMismatch => 3,
        }
    }
}

fn describe(termination: &Termination) -> String {
    match termination {
        Termination::Converged => "converged".into(),
        Termination::MaxIterations => "iteration limit reached".into(),
        Termination::Stalled(err) => format!("stalled: {err}"),
    }
}

fn write_csv(path: &Path, record: &ConvergenceRecord) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    record
        .write_csv(BufWriter::new(file))
        .with_context(|| format!("writing {}", path.display()))
}

fn run_solver(kind: SolverKind, problem: &ControlProblem, config: &SolverConfig) -> Result<ConvergenceRecord> {
    let (_, record) = kind
        .run(problem, &problem.zero_command(), config)
        .with_context(|| format!("running {kind}"))?;
    Ok(record)
}

fn summary(record: &ConvergenceRecord) -> String {
    let last = record.last();
    format!(
        "{}: {} after {} iterations, f = {:.6e}, ||grad f|| = {:.3e}, {} oracle calls",
        record.solver,
        describe(&record.termination),
        record.iterations(),
        last.f,
        last.grad_norm,
        last.oracle_calls
    )
}

/// Run one solver from the zero command; writes `trace.csv` and optionally
/// `fval.svg` and `gradnorm.svg` to the output directory.
pub fn solve(cfg: &RunConfig) -> Result<Outcome> {
    let kind = match cfg.solvers.as_slice() {
        [kind] => *kind,
        [] => bail!("solve needs a solver"),
        _ => bail!("solve runs a single solver; use compare for several"),
    };
    let problem = cfg.env.build(cfg.tau, cfg.seed)?;
    let record = run_solver(kind, &problem, &cfg.solver)?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    write_csv(&cfg.out.join("trace.csv"), &record)?;
    if cfg.plot {
        write_trace_plot(&cfg.out.join("fval.svg"), &record, Quantity::Objective)?;
        write_trace_plot(&cfg.out.join("gradnorm.svg"), &record, Quantity::GradientNorm)?;
    }
    println!("{} on {}: {}", kind, cfg.env, summary(&record));
    Ok(if record.converged() { Outcome::Success } else { Outcome::NotConverged })
}

/// Run several solvers in parallel on the same problem; writes
/// `<solver>.csv` for each and the combined `compare.svg`.
pub fn compare(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.solvers.len() < 2 {
        bail!("compare needs at least two solvers");
    }
    for (i, kind) in cfg.solvers.iter().enumerate() {
        if cfg.solvers[..i].contains(kind) {
            bail!("solver {kind} listed twice");
        }
    }
    let problem = cfg.env.build(cfg.tau, cfg.seed)?;
    let results: Vec<Result<ConvergenceRecord>> = thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .solvers
            .iter()
            .map(|kind| {
                let problem = &problem;
                scope.spawn(move || run_solver(*kind, problem, &cfg.solver))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("solver thread panicked"))))
            .collect()
    });
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    for record in &records {
        write_csv(&cfg.out.join(format!("{}.csv", record.solver)), record)?;
        println!("{}", summary(record));
    }
    let refs: Vec<&ConvergenceRecord> = records.iter().collect();
    write_comparison_plot(&cfg.out.join("compare.svg"), &refs)?;
    Ok(if records.iter().all(ConvergenceRecord::converged) {
        Outcome::Success
    } else {
        Outcome::NotConverged
    })
}

/// Maximum relative error between the oracle gradient and central finite
/// differences over `samples` random commands with entries `N(0, scale^2)`.
pub fn gradient_error(problem: &ControlProblem, samples: usize, seed: u64, scale: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (problem.horizon() * problem.control_dim(), problem.control_dim());
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let flat = nalgebra::DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        let u = Command::from_flat(flat.clone(), p)?;
        let mut oracle = Oracle::new(problem);
        let tape = oracle.record(&u, DerivativeOrder::First)?;
        let grad = oracle.objective_gradient(&tape)?;
        let reference = fd::gradient(
            |v| {
                Command::from_flat(v.clone(), p)
                    .and_then(|c| problem.objective(&c))
                    .unwrap_or(f64::NAN)
            },
            &flat,
        );
        let err = fd::relative_error(&grad, &reference, 1e-8);
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    Ok(worst)
}

pub fn check_grad_problem(problem: &ControlProblem, samples: usize, seed: u64, scale: f64) -> Result<Outcome> {
    let worst = gradient_error(problem, samples, seed, scale)?;
    println!("max relative gradient error over {samples} commands: {worst:.3e}");
    Ok(if worst <= GRADIENT_TOLERANCE {
        Outcome::Success
    } else {
        Outcome::GradientMismatch
    })
}

pub fn check_grad(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.env.build(cfg.tau, cfg.seed)?;
    check_grad_problem(&problem, cfg.samples, cfg.seed, cfg.env.command_scale())
}
