//! Outer loops: gradient descent, ILQR with Armijo backtracking, regularized
//! ILQR/ILQG with a sufficient-decrease line search on the step size,
//! accelerated regularized Gauss-Newton, iLQG with true roll-outs, and DDP.
//!
//! Every solver returns its final command and a [`ConvergenceRecord`] whose
//! row `k = 0` describes the starting point.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;

use crate::autodiff::{DerivativeOrder, ForwardTape, Oracle, OracleCounter};
use crate::error::{Error, Result};
use crate::problem::{Command, ControlProblem};
use crate::steps::{ddp_step_with, ilqg_step_with, ilqr_step_with, tassa_ilqg_step_with, DdpParams, StepReport};

/// Smallest step size tried by the step-size line searches.
pub const MIN_STEP: f64 = 1e-14;

/// Acceptance test of the step-size line search for regularized steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecreaseRule {
    /// `f(u+) <= q_f(u+; u) + ||u+ - u||^2 / (2 gamma)`.
    #[default]
    Model,
    /// `f(u+) <= f(u) + ||u+ - u||^2 / (2 gamma)`.
    Objective,
    /// `f(u+) <= f(u) - ||u+ - u||^2 / (2 gamma)`.
    Certificate,
}

impl DecreaseRule {
    fn accepts(self, f_u: f64, f_next: f64, predicted_decrease: f64, step_sq: f64, gamma: f64) -> bool {
        let prox = step_sq / (2.0 * gamma);
        match self {
            DecreaseRule::Model => f_next <= f_u - predicted_decrease + prox,
            DecreaseRule::Objective => f_next <= f_u + prox,
            DecreaseRule::Certificate => f_next <= f_u - prox,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once `||grad f|| < tolerance`.
    pub tolerance: f64,
    pub gamma0: f64,
    /// Backtracking factor in `(0, 1)`.
    pub rho: f64,
    /// Run the accelerated variant when the regularized ILQR solver is selected.
    pub acceleration: bool,
    /// Armijo constant of the ILQR and ILQG solvers.
    pub armijo_c1: f64,
    pub seed: u64,
    pub decrease_rule: DecreaseRule,
    /// Freeze the step size at the median accepted value of this many first
    /// iterations; the line search still guards every later step.
    pub burn_in: Option<usize>,
    /// Keep every iterate in the record.
    pub keep_iterates: bool,
    pub ddp: DdpParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-6,
            gamma0: 1.0,
            rho: 0.5,
            acceleration: false,
            armijo_c1: 1e-4,
            seed: 0,
            decrease_rule: DecreaseRule::Model,
            burn_in: None,
            keep_iterates: false,
            ddp: DdpParams::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.gamma0 > 0.0) {
            return Err(Error::InvalidConfig("gamma0 must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig("rho must lie in (0, 1)".into()));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(Error::InvalidConfig("armijo_c1 must lie in (0, 1)".into()));
        }
        if self.burn_in == Some(0) {
            return Err(Error::InvalidConfig("burn-in needs at least one iteration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    /// Accepted step size; `None` on the initial row.
    pub gamma: Option<f64>,
    /// Accepted extrapolation step size (accelerated solver only).
    pub delta: Option<f64>,
    /// Cumulative oracle calls.
    pub oracle_calls: u64,
    pub wall_s: f64,
    /// `||u_k - u_{k-1}||`.
    pub step_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// A line search failed; the record holds the iterations completed before.
    Stalled(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub solver: String,
    pub rows: Vec<IterationRow>,
    /// `u_0, u_1, ...` when `keep_iterates` is set.
    pub iterates: Vec<Command>,
    pub termination: Termination,
    pub oracle_calls: OracleCounter,
}

pub const CSV_HEADER: &str = "k,f,grad_norm,gamma,delta,oracle_calls,wall_s";

impl ConvergenceRecord {
    fn new(solver: &str) -> Self {
        Self {
            solver: solver.to_string(),
            rows: Vec::new(),
            iterates: Vec::new(),
            termination: Termination::MaxIterations,
            oracle_calls: OracleCounter::default(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.k)
    }

    pub fn last(&self) -> &IterationRow {
        self.rows.last().expect("a record always holds the initial row")
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.k,
                r.f,
                r.grad_norm,
                opt(r.gamma),
                opt(r.delta),
                r.oracle_calls,
                r.wall_s
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Shared bookkeeping of one solver run.
struct Run<'p> {
    oracle: Oracle<'p>,
    record: ConvergenceRecord,
    start: Instant,
    keep_iterates: bool,
}

/// Current iterate with its tape, value and gradient.
struct Point {
    u: Command,
    tape: ForwardTape,
    f: f64,
    grad: DVector<f64>,
}

impl<'p> Run<'p> {
    fn new(problem: &'p ControlProblem, name: &str, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            oracle: Oracle::new(problem),
            record: ConvergenceRecord::new(name),
            start: Instant::now(),
            keep_iterates: config.keep_iterates,
        })
    }

    fn evaluate(&mut self, u: Command, order: DerivativeOrder) -> Result<Point> {
        let tape = self.oracle.record(&u, order)?;
        let f = self.oracle.problem().objective(&u)?;
        let grad = self.oracle.objective_gradient(&tape)?;
        Ok(Point { u, tape, f, grad })
    }

    fn push(&mut self, point: &Point, gamma: Option<f64>, delta: Option<f64>, step_norm: f64) {
        let k = self.record.rows.len();
        self.record.rows.push(IterationRow {
            k,
            f: point.f,
            grad_norm: point.grad.norm(),
            gamma,
            delta,
            oracle_calls: self.oracle.counter().total(),
            wall_s: self.start.elapsed().as_secs_f64(),
            step_norm,
        });
        if self.keep_iterates {
            self.record.iterates.push(point.u.clone());
        }
    }

    fn finish(mut self, point: Point, termination: Termination) -> (Command, ConvergenceRecord) {
        self.record.termination = termination;
        self.record.oracle_calls = self.oracle.counter();
        (point.u, self.record)
    }
}

fn is_search_failure(err: &Error) -> bool {
    matches!(
        err,
        Error::LineSearchFailed { .. } | Error::NoDecrease { .. } | Error::IllConditioned { .. } | Error::IndefiniteModel { .. }
    )
}

/// Generic outer loop: `advance` maps the current point to the next one with
/// the accepted `(gamma, delta)`.
fn iterate<'p>(
    mut run: Run<'p>,
    u0: &Command,
    config: &SolverConfig,
    order: DerivativeOrder,
    mut advance: impl FnMut(&mut Run<'p>, &Point, usize) -> Result<(Point, Option<f64>, Option<f64>)>,
) -> Result<(Command, ConvergenceRecord)> {
    run.oracle.problem().check_command(u0)?;
    let mut point = run.evaluate(u0.clone(), order)?;
    run.push(&point, None, None, 0.0);
    for k in 1..=config.max_iterations {
        if point.grad.norm() < config.tolerance {
            return Ok(run.finish(point, Termination::Converged));
        }
        match advance(&mut run, &point, k) {
            Ok((next, gamma, delta)) => {
                let step_norm = (next.u.as_vector() - point.u.as_vector()).norm();
                run.push(&next, gamma, delta, step_norm);
                point = next;
            }
            Err(err) if is_search_failure(&err) => {
                return Ok(run.finish(point, Termination::Stalled(err)));
            }
            Err(err) => return Err(err),
        }
    }
    let termination = if point.grad.norm() < config.tolerance {
        Termination::Converged
    } else {
        Termination::MaxIterations
    };
    Ok(run.finish(point, termination))
}

/// Gradient descent `u+ = u - gamma grad f(u)` with backtracking until
/// `f(u+) <= f(u) - gamma/2 ||grad f(u)||^2`.
pub fn gradient_descent(problem: &ControlProblem, u0: &Command, config: &SolverConfig) -> Result<(Command, ConvergenceRecord)> {
    let run = Run::new(problem, "gd", config)?;
    let mut gamma_prev = config.gamma0;
    iterate(run, u0, config, DerivativeOrder::First, |run, point, k| {
        let grad_sq = point.grad.norm_squared();
        let mut gamma = if k == 1 { config.gamma0 } else { (gamma_prev / config.rho).min(config.gamma0) };
        loop {
            if gamma < MIN_STEP {
                return Err(Error::LineSearchFailed { min_step: MIN_STEP });
            }
            let next = point.u.offset(&point.grad, -gamma);
            if let Ok(f_next) = problem.objective(&next) {
                if f_next <= point.f - 0.5 * gamma * grad_sq {
                    gamma_prev = gamma;
                    return Ok((run.evaluate(next, DerivativeOrder::First)?, Some(gamma), None));
                }
            }
            gamma *= config.rho;
        }
    })
}

/// Which linear-quadratic model a regularized step minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ModelKind {
    Deterministic,
    Gaussian,
}

fn model_step(oracle: &mut Oracle<'_>, tape: &ForwardTape, gamma: f64, kind: ModelKind) -> Result<StepReport> {
    match kind {
        ModelKind::Deterministic => ilqr_step_with(oracle, tape, gamma),
        ModelKind::Gaussian => ilqg_step_with(oracle, tape, gamma),
    }
}

/// Accepted regularized step.
struct Accepted {
    command: Command,
    f: f64,
    gamma: f64,
}

/// Backtracking from `gamma_start` over `gamma_start * rho^j` until the rule
/// accepts `u + step(gamma)`.
fn step_size_search(
    oracle: &mut Oracle<'_>,
    tape: &ForwardTape,
    f_u: f64,
    gamma_start: f64,
    rho: f64,
    rule: DecreaseRule,
    kind: ModelKind,
) -> Result<Accepted> {
    let problem = oracle.problem();
    let mut gamma = gamma_start;
    loop {
        if gamma < MIN_STEP {
            return Err(Error::LineSearchFailed { min_step: MIN_STEP });
        }
        let step = model_step(oracle, tape, gamma, kind)?;
        if let Ok(f_next) = problem.objective(&step.command) {
            if rule.accepts(f_u, f_next, step.predicted_decrease, step.direction.norm_squared(), gamma) {
                return Ok(Accepted {
                    command: step.command,
                    f: f_next,
                    gamma,
                });
            }
        }
        gamma *= rho;
    }
}

/// Sufficient-decrease line search for the regularized Gauss-Newton step:
/// the first `gamma = gamma_start * rho^j` with
/// `f(u + v) <= q_f(u + v; u) + ||v||^2 / (2 gamma)`. Returns the new command
/// and the accepted step size.
pub fn sufficient_decrease_linesearch(
    problem: &ControlProblem,
    u: &Command,
    gamma_start: f64,
    rho: f64,
) -> Result<(Command, f64)> {
    if !(gamma_start > 0.0) || !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidConfig("need gamma_start > 0 and rho in (0, 1)".into()));
    }
    let mut oracle = Oracle::new(problem);
    let tape = oracle.record(u, DerivativeOrder::First)?;
    let f_u = problem.objective(u)?;
    let acc = step_size_search(&mut oracle, &tape, f_u, gamma_start, rho, DecreaseRule::Model, ModelKind::Deterministic)?;
    Ok((acc.command, acc.gamma))
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Step-size warm start: `min(gamma_{k-1} / rho, gamma0)`, or the frozen
/// value after a burn-in phase.
struct StepSchedule {
    gamma0: f64,
    rho: f64,
    previous: Option<f64>,
    burn_in: Option<usize>,
    accepted: Vec<f64>,
    frozen: Option<f64>,
}

impl StepSchedule {
    fn new(config: &SolverConfig) -> Self {
        Self {
            gamma0: config.gamma0,
            rho: config.rho,
            previous: None,
            burn_in: config.burn_in,
            accepted: Vec::new(),
            frozen: None,
        }
    }

    fn start(&self) -> f64 {
        if let Some(g) = self.frozen {
            return g;
        }
        self.previous.map_or(self.gamma0, |g| (g / self.rho).min(self.gamma0))
    }

    fn accept(&mut self, gamma: f64) {
        self.previous = Some(gamma);
        if let Some(n) = self.burn_in {
            if self.frozen.is_none() {
                self.accepted.push(gamma);
                if self.accepted.len() == n {
                    self.frozen = Some(median(&self.accepted));
                }
            }
        }
    }
}

fn regularized(
    problem: &ControlProblem,
    u0: &Command,
    config: &SolverConfig,
    name: &str,
    rule: DecreaseRule,
    kind: ModelKind,
) -> Result<(Command, ConvergenceRecord)> {
    let run = Run::new(problem, name, config)?;
    let mut schedule = StepSchedule::new(config);
    iterate(run, u0, config, DerivativeOrder::First, |run, point, _| {
        let acc = step_size_search(&mut run.oracle, &point.tape, point.f, schedule.start(), config.rho, rule, kind)?;
        schedule.accept(acc.gamma);
        Ok((run.evaluate(acc.command, DerivativeOrder::First)?, Some(acc.gamma), None))
    })
}

/// Regularized ILQR (regularized Gauss-Newton with line search).
pub fn regularized_ilqr(problem: &ControlProblem, u0: &Command, config: &SolverConfig) -> Result<(Command, ConvergenceRecord)> {
    regularized(problem, u0, config, "reg_ilqr", config.decrease_rule, ModelKind::Deterministic)
}

/// Regularized ILQG. The Gaussian model is not the deterministic model the
/// objective is compared to, so the model rule is replaced by the
/// certificate rule.
pub fn regularized_ilqg_solver(problem: &ControlProblem, u0: &Command, config: &SolverConfig) -> Result<(Command, ConvergenceRecord)> {
    let rule = match config.decrease_rule {
        DecreaseRule::Model => DecreaseRule::Certificate,
        other => other,
    };
    regularized(problem, u0, config, "reg_ilqg", rule, ModelKind::Gaussian)
}

/// Extrapolation state of the accelerated method.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelState {
    pub alpha: f64,
    /// `z_{k-1}`.
    pub anchor: Command,
    /// `y_k`.
    pub extrapolated: Command,
}

impl AccelState {
    pub fn new(u0: &Command) -> Self {
        Self {
            alpha: 1.0,
            anchor: u0.clone(),
            extrapolated: u0.clone(),
        }
    }

    /// Positive root of `(1 - a) / a^2 = 1 / alpha^2`.
    pub fn next_alpha(alpha: f64) -> f64 {
        let a2 = alpha * alpha;
        ((a2 * a2 + 4.0 * a2).sqrt() - a2) / 2.0
    }

    /// `y_k = alpha_k z_{k-1} + (1 - alpha_k) u_{k-1}`.
    pub fn extrapolate(&mut self, previous: &Command) -> &Command {
        let y = self.anchor.as_vector() * self.alpha + previous.as_vector() * (1.0 - self.alpha);
        self.extrapolated = Command::from_flat(y, previous.dim()).expect("same layout");
        &self.extrapolated
    }

    /// `z_k = u_{k-1} + (w_k - u_{k-1}) / alpha_k`, then `alpha_{k+1}`.
    pub fn advance(&mut self, previous: &Command, w: &Command) {
        let z = previous.as_vector() + (w.as_vector() - previous.as_vector()) / self.alpha;
        self.anchor = Command::from_flat(z, previous.dim()).expect("same layout");
        self.alpha = Self::next_alpha(self.alpha);
    }
}

/// Accelerated regularized Gauss-Newton. The `gamma` branch warm-starts like
/// [`regularized_ilqr`]; the `delta` branch starts from `gamma0` and then from
/// the previous `delta`, so the `delta_k` are nonincreasing.
pub fn accelerated_reg_gn(problem: &ControlProblem, u0: &Command, config: &SolverConfig) -> Result<(Command, ConvergenceRecord)> {
    let run = Run::new(problem, "acc_reg_ilqr", config)?;
    let mut schedule = StepSchedule::new(config);
    let mut delta_prev = config.gamma0;
    let mut state = AccelState::new(u0);
    iterate(run, u0, config, DerivativeOrder::First, |run, point, _| {
        let v = step_size_search(
            &mut run.oracle,
            &point.tape,
            point.f,
            schedule.start(),
            config.rho,
            config.decrease_rule,
            ModelKind::Deterministic,
        )?;
        schedule.accept(v.gamma);

        let y = state.extrapolate(&point.u).clone();
        let w = if y == point.u {
            step_size_search(&mut run.oracle, &point.tape, point.f, delta_prev, config.rho, config.decrease_rule, ModelKind::Deterministic)?
        } else {
            let tape_y = run.oracle.record(&y, DerivativeOrder::First)?;
            let f_y = problem.objective(&y)?;
            step_size_search(&mut run.oracle, &tape_y, f_y, delta_prev, config.rho, config.decrease_rule, ModelKind::Deterministic)?
        };
        delta_prev = w.gamma;
        state.advance(&point.u, &w.command);

        let best = if w.f < v.f { w.command } else { v.command };
        Ok((run.evaluate(best, DerivativeOrder::First)?, Some(v.gamma), Some(w.gamma)))
    })
}

/// Armijo backtracking on `alpha` along a model step.
fn armijo(problem: &ControlProblem, point: &Point, direction: &DVector<f64>, config: &SolverConfig) -> Result<(Command, f64)> {
    let slope = point.grad.dot(direction);
    let mut alpha = 1.0;
    loop {
        if alpha < MIN_STEP {
            return Err(Error::LineSearchFailed { min_step: MIN_STEP });
        }
        let next = point.u.offset(direction, alpha);
        if let Ok(f_next) = problem.objective(&next) {
            if f_next <= point.f + config.armijo_c1 * alpha * slope {
                return Ok((next, alpha));
            }
        }
        alpha *= config.rho;
    }
}

fn armijo_solver(
    problem: &ControlProblem,
    u0: &Command,
    config: &SolverConfig,
    name: &str,
    kind: ModelKind,
) -> Result<(Command, ConvergenceRecord)> {
    let run = Run::new(problem, name, config)?;
    iterate(run, u0, config, DerivativeOrder::First, |run, point, _| {
        let step = model_step(&mut run.oracle, &point.tape, f64::INFINITY, kind)?;
        let (next, alpha) = armijo(problem, point, &step.direction, config)?;
        Ok((run.evaluate(next, DerivativeOrder::First)?, Some(alpha), None))
    })
}

/// ILQR: undamped LQ step with Armijo backtracking on its length.
pub fn ilqr_solver(problem: &ControlProblem, u0: &Command, config: &SolverConfig) -> Result<(Command, ConvergenceRecord)> {
    armijo_solver(problem, u0, config, "ilqr", ModelKind::Deterministic)
}

/// ILQG: undamped Gaussian-model step with Armijo backtracking. Stopping uses
/// the deterministic gradient.
pub fn ilqg_solver(problem: &ControlProblem, u0: &Command, config: &SolverConfig) -> Result<(Command, ConvergenceRecord)> {
    armijo_solver(problem, u0, config, "ilqg", ModelKind::Gaussian)
}

/// Iterated iLQG steps with feedback roll-outs on the true dynamics.
pub fn tassa_ilqg_solver(problem: &ControlProblem, u0: &Command, config: &SolverConfig) -> Result<(Command, ConvergenceRecord)> {
    let run = Run::new(problem, "tassa_ilqg", config)?;
    iterate(run, u0, config, DerivativeOrder::First, |run, point, _| {
        let step = tassa_ilqg_step_with(&mut run.oracle, &point.tape, &config.ddp.search)?;
        Ok((run.evaluate(step.command, DerivativeOrder::First)?, Some(step.step_size), None))
    })
}

/// Iterated DDP steps.
pub fn ddp_solver(problem: &ControlProblem, u0: &Command, config: &SolverConfig) -> Result<(Command, ConvergenceRecord)> {
    let run = Run::new(problem, "ddp", config)?;
    iterate(run, u0, config, DerivativeOrder::Second, |run, point, _| {
        let step = ddp_step_with(&mut run.oracle, &point.tape, &config.ddp)?;
        Ok((run.evaluate(step.command, DerivativeOrder::Second)?, Some(step.step_size), None))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    GradientDescent,
    Ilqr,
    RegIlqr,
    AccRegIlqr,
    Ilqg,
    RegIlqg,
    TassaIlqg,
    Ddp,
}

impl SolverKind {
    pub const ALL: [SolverKind; 8] = [
        SolverKind::GradientDescent,
        SolverKind::Ilqr,
        SolverKind::RegIlqr,
        SolverKind::AccRegIlqr,
        SolverKind::Ilqg,
        SolverKind::RegIlqg,
        SolverKind::TassaIlqg,
        SolverKind::Ddp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::GradientDescent => "gd",
            SolverKind::Ilqr => "ilqr",
            SolverKind::RegIlqr => "reg_ilqr",
            SolverKind::AccRegIlqr => "acc_reg_ilqr",
            SolverKind::Ilqg => "ilqg",
            SolverKind::RegIlqg => "reg_ilqg",
            SolverKind::TassaIlqg => "tassa_ilqg",
            SolverKind::Ddp => "ddp",
        }
    }

    /// Whether the solver needs second derivatives of the dynamics.
    pub fn needs_second_derivatives(self) -> bool {
        self == SolverKind::Ddp
    }

    pub fn run(self, problem: &ControlProblem, u0: &Command, config: &SolverConfig) -> Result<(Command, ConvergenceRecord)> {
        match self {
            SolverKind::GradientDescent => gradient_descent(problem, u0, config),
            SolverKind::Ilqr => ilqr_solver(problem, u0, config),
            SolverKind::RegIlqr if config.acceleration => accelerated_reg_gn(problem, u0, config),
            SolverKind::RegIlqr => regularized_ilqr(problem, u0, config),
            SolverKind::AccRegIlqr => accelerated_reg_gn(problem, u0, config),
            SolverKind::Ilqg => ilqg_solver(problem, u0, config),
            SolverKind::RegIlqg => regularized_ilqg_solver(problem, u0, config),
            SolverKind::TassaIlqg => tassa_ilqg_solver(problem, u0, config),
            SolverKind::Ddp => ddp_solver(problem, u0, config),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown solver '{s}'")))
    }
}
