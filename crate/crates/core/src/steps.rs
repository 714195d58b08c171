//! One-iteration step constructors: ILQR and regularized ILQR, ILQG, the
//! iLQG variant with a roll-out on the true dynamics, DDP, and the dual
//! conjugate-gradient Gauss-Newton step for final-state problems.
//!
//! Each step has a convenience form taking the problem and a command, and a
//! `_with` form working on an [`Oracle`] and an already recorded tape so that
//! solvers can share the oracle-call accounting.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::autodiff::{DerivativeOrder, ForwardTape, Oracle, OracleCounter};
use crate::error::{Error, Result};
use crate::lqr::{backward_with, lq_backward, lq_rollout, lqg_backward, FeedbackPolicy, LqSubproblem, StageTerms};
use crate::problem::{Command, ControlProblem, Trajectory};

/// Outcome of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// `command - u`.
    pub direction: DVector<f64>,
    pub command: Command,
    /// Decrease predicted by the model minimized in the step. For model-based
    /// steps this is `f(u) - q_f(u + v; u)`, without the proximal term.
    pub predicted_decrease: f64,
    /// `gamma` for model steps, accepted `alpha` for roll-out steps.
    pub step_size: f64,
    /// Line-search trials, jitter increases or conjugate-gradient iterations.
    pub inner_iterations: usize,
    pub oracle_calls: OracleCounter,
}

fn model_report(
    oracle: &mut Oracle<'_>,
    tape: &ForwardTape,
    sub: &LqSubproblem,
    policy: &FeedbackPolicy,
    start: OracleCounter,
) -> StepReport {
    let (v, y) = lq_rollout(sub, policy);
    oracle.count_model_solve();
    let change = sub.model_change(&v, &y);
    StepReport {
        command: tape.command().offset(&v, 1.0),
        direction: v,
        predicted_decrease: -change,
        step_size: sub.gamma,
        inner_iterations: 1,
        oracle_calls: oracle.counter().since(&start),
    }
}

/// ILQR step (`gamma = f64::INFINITY`) or regularized ILQR step on a recorded tape.
pub fn ilqr_step_with(oracle: &mut Oracle<'_>, tape: &ForwardTape, gamma: f64) -> Result<StepReport> {
    let start = oracle.counter();
    let sub = LqSubproblem::from_tape(oracle.problem(), tape, gamma);
    let (policy, _) = lq_backward(&sub)?;
    Ok(model_report(oracle, tape, &sub, &policy, start))
}

/// ILQR step (`gamma = f64::INFINITY`) or regularized ILQR step at `u`.
pub fn ilqr_step(problem: &ControlProblem, u: &Command, gamma: f64) -> Result<StepReport> {
    let mut oracle = Oracle::new(problem);
    let tape = oracle.record(u, DerivativeOrder::First)?;
    let mut report = ilqr_step_with(&mut oracle, &tape, gamma)?;
    report.oracle_calls = oracle.counter();
    Ok(report)
}

/// ILQG step on a recorded tape. The dynamics are assumed to have vanishing
/// `xx`, `xw` and `ux` second derivatives; only the noise gradient and the
/// `uw` cross derivative enter the model.
pub fn ilqg_step_with(oracle: &mut Oracle<'_>, tape: &ForwardTape, gamma: f64) -> Result<StepReport> {
    let start = oracle.counter();
    let problem = oracle.problem();
    let sub = LqSubproblem::from_tape(problem, tape, gamma).with_tape_noise(tape, problem.noise_dim())?;
    let (policy, _) = lqg_backward(&sub)?;
    Ok(model_report(oracle, tape, &sub, &policy, start))
}

/// ILQG step (`gamma = f64::INFINITY`) or regularized ILQG step at `u`.
pub fn ilqg_step(problem: &ControlProblem, u: &Command, gamma: f64) -> Result<StepReport> {
    let mut oracle = Oracle::new(problem);
    let tape = oracle.record(u, DerivativeOrder::First)?;
    let mut report = ilqg_step_with(&mut oracle, &tape, gamma)?;
    report.oracle_calls = oracle.counter();
    Ok(report)
}

/// Backtracking on the feedback roll-out over the true dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutSearch {
    /// Factor applied to `alpha` after a rejected trial.
    pub rho_minus: f64,
    pub max_trials: usize,
    pub min_alpha: f64,
}

impl Default for RolloutSearch {
    fn default() -> Self {
        Self {
            rho_minus: 0.5,
            max_trials: 50,
            min_alpha: 1e-12,
        }
    }
}

/// DDP hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpParams {
    pub lambda0: f64,
    pub rho_plus: f64,
    pub max_lambda: f64,
    /// Contract the tensors with `c_{t+1} + C_{t+1} x_{t+1}` instead of `c_{t+1}`.
    pub shifted: bool,
    pub search: RolloutSearch,
}

impl Default for DdpParams {
    fn default() -> Self {
        Self {
            lambda0: 1e-6,
            rho_plus: 10.0,
            max_lambda: 1e12,
            shifted: false,
            search: RolloutSearch::default(),
        }
    }
}

/// Expected change `sum_t alpha k^T w_u + alpha^2/2 k^T W_uu k` of the
/// quadratic model along the feedback policy.
#[derive(Debug, Clone, Default)]
struct ExpectedChange {
    linear: f64,
    quadratic: f64,
}

impl ExpectedChange {
    fn record(&mut self, terms: &StageTerms, offset: &DVector<f64>) {
        self.linear += offset.dot(&terms.u);
        self.quadratic += 0.5 * offset.dot(&(&terms.uu * offset));
    }

    fn at(&self, alpha: f64) -> f64 {
        alpha * self.linear + alpha * alpha * self.quadratic
    }
}

/// `u+_t = u_t + K_t (x+_t - x_t) + alpha k_t`, `x+_{t+1} = phi_t(x+_t, u+_t)`;
/// `alpha` shrinks until `f(u+) <= f(u)`. Returns the command, its objective,
/// the accepted `alpha` and the number of trials.
fn feedback_line_search(
    problem: &ControlProblem,
    traj: &Trajectory,
    u: &Command,
    f_u: f64,
    policy: &FeedbackPolicy,
    search: &RolloutSearch,
) -> Result<(Command, f64, f64, usize)> {
    if !(search.rho_minus > 0.0 && search.rho_minus < 1.0) {
        return Err(Error::InvalidConfig("rho_minus must lie in (0, 1)".into()));
    }
    let tau = problem.horizon();
    let mut alpha = 1.0;
    for trial in 1..=search.max_trials {
        if alpha < search.min_alpha {
            return Err(Error::NoDecrease { trials: trial - 1 });
        }
        let mut next = u.clone();
        let mut x = problem.initial_state().clone();
        let mut finite = true;
        for t in 0..tau {
            let ut = u.step(t) + &policy.gains[t] * (&x - traj.state(t)) + &policy.offsets[t] * alpha;
            x = problem.dynamics(t).step(&x, &ut);
            next.set_step(t, &ut);
            if !x.iter().all(|v| v.is_finite()) {
                finite = false;
                break;
            }
        }
        if finite {
            if let Ok(f_next) = problem.objective(&next) {
                if f_next <= f_u {
                    return Ok((next, f_next, alpha, trial));
                }
            }
        }
        alpha *= search.rho_minus;
    }
    Err(Error::NoDecrease {
        trials: search.max_trials,
    })
}

fn rollout_report(
    oracle: &Oracle<'_>,
    tape: &ForwardTape,
    f_u: f64,
    policy: &FeedbackPolicy,
    expected: &ExpectedChange,
    search: &RolloutSearch,
    start: OracleCounter,
) -> Result<StepReport> {
    let u = tape.command();
    let (command, _, alpha, trials) = feedback_line_search(oracle.problem(), tape.trajectory(), u, f_u, policy, search)?;
    Ok(StepReport {
        direction: command.as_vector() - u.as_vector(),
        command,
        predicted_decrease: -expected.at(alpha),
        step_size: alpha,
        inner_iterations: trials,
        oracle_calls: oracle.counter().since(&start),
    })
}

/// iLQG step with the ILQR backward pass and a feedback roll-out on the true
/// dynamics.
pub fn tassa_ilqg_step_with(oracle: &mut Oracle<'_>, tape: &ForwardTape, search: &RolloutSearch) -> Result<StepReport> {
    let start = oracle.counter();
    let problem = oracle.problem();
    let sub = LqSubproblem::from_tape(problem, tape, f64::INFINITY);
    let mut expected = ExpectedChange::default();
    let mut stages = Vec::with_capacity(sub.horizon());
    let (policy, _) = backward_with(&sub, |_, terms, _, _| {
        stages.push(terms.clone());
        Ok(())
    })?;
    oracle.count_model_solve();
    for (terms, offset) in stages.iter().rev().zip(&policy.offsets) {
        expected.record(terms, offset);
    }
    let f_u = problem.objective(tape.command())?;
    rollout_report(oracle, tape, f_u, &policy, &expected, search, start)
}

pub fn tassa_ilqg_step(problem: &ControlProblem, u: &Command, search: &RolloutSearch) -> Result<StepReport> {
    let mut oracle = Oracle::new(problem);
    let tape = oracle.record(u, DerivativeOrder::First)?;
    let mut report = tassa_ilqg_step_with(&mut oracle, &tape, search)?;
    report.oracle_calls = oracle.counter();
    Ok(report)
}

/// DDP step on a tape recorded with second derivatives.
pub fn ddp_step_with(oracle: &mut Oracle<'_>, tape: &ForwardTape, params: &DdpParams) -> Result<StepReport> {
    if !tape.has_second_derivatives() {
        return Err(Error::MissingCapability("second derivatives"));
    }
    if !(params.lambda0 > 0.0 && params.rho_plus > 1.0) {
        return Err(Error::InvalidConfig("DDP needs lambda0 > 0 and rho_plus > 1".into()));
    }
    let start = oracle.counter();
    let problem = oracle.problem();
    let sub = LqSubproblem::from_tape(problem, tape, f64::INFINITY);
    let traj = tape.trajectory();
    let mut stages = Vec::with_capacity(sub.horizon());
    let mut jitter_steps = 0;
    let (policy, _) = backward_with(&sub, |t, terms, next_hessian, next_linear| {
        let costate = if params.shifted {
            let shift = next_hessian * traj.state(t + 1);
            terms.x += &sub.grad_x[t] * &shift;
            terms.u += &sub.grad_u[t] * &shift;
            next_linear + shift
        } else {
            next_linear.clone()
        };
        let second = tape.second_derivatives(t).expect("checked above");
        terms.xx += second.xx.contract(&costate);
        terms.ux += second.ux.contract(&costate);
        terms.uu += second.uu.contract(&costate);

        if terms.factor_uu().is_none() {
            let base = terms.uu.clone();
            let p = base.nrows();
            let mut lambda = params.lambda0;
            loop {
                if lambda > params.max_lambda {
                    return Err(Error::IndefiniteModel { t, lambda });
                }
                terms.uu = &base + DMatrix::identity(p, p) * lambda;
                lambda *= params.rho_plus;
                jitter_steps += 1;
                if terms.factor_uu().is_some() {
                    break;
                }
            }
        }
        stages.push(terms.clone());
        Ok(())
    })?;
    oracle.count_model_solve();
    let mut expected = ExpectedChange::default();
    for (terms, offset) in stages.iter().rev().zip(&policy.offsets) {
        expected.record(terms, offset);
    }
    let f_u = problem.objective(tape.command())?;
    let mut report = rollout_report(oracle, tape, f_u, &policy, &expected, &params.search, start)?;
    report.inner_iterations += jitter_steps;
    Ok(report)
}

pub fn ddp_step(problem: &ControlProblem, u: &Command, params: &DdpParams) -> Result<StepReport> {
    let mut oracle = Oracle::new(problem);
    let tape = oracle.record(u, DerivativeOrder::Second)?;
    let mut report = ddp_step_with(&mut oracle, &tape, params)?;
    report.oracle_calls = oracle.counter();
    Ok(report)
}

/// Block-diagonal `S = diag(G_t) + gamma^{-1} I` with per-block factors.
struct ControlMetric {
    blocks: Vec<Cholesky<f64, Dyn>>,
    dim: usize,
}

impl ControlMetric {
    fn new(problem: &ControlProblem, u: &Command, gamma: f64) -> Result<Self> {
        let p = problem.control_dim();
        let inv_gamma = if gamma.is_infinite() { 0.0 } else { 1.0 / gamma };
        let mut blocks = Vec::with_capacity(problem.horizon());
        for t in 0..problem.horizon() {
            let s = problem.control_cost(t).hessian(&u.step(t)) + DMatrix::identity(p, p) * inv_gamma;
            blocks.push(Cholesky::new(s).ok_or(Error::IllConditioned { t })?);
        }
        Ok(Self { blocks, dim: p })
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let p = self.dim;
        let mut out = rhs.clone();
        for (t, chol) in self.blocks.iter().enumerate() {
            let block = chol.solve(&rhs.rows(t * p, p).into_owned());
            out.rows_mut(t * p, p).copy_from(&block);
        }
        out
    }
}

fn last_block_embedding(tau: usize, d: usize, z: &DVector<f64>) -> DVector<f64> {
    let mut full = DVector::zeros(tau * d);
    full.rows_mut((tau - 1) * d, d).copy_from(z);
    full
}

/// Regularized Gauss-Newton step for a final-state problem through its
/// `d`-dimensional dual, solved by conjugate gradient.
///
/// With `J = grad x_tau(u)` (`tau p x d`), `H`, `h` the Hessian and gradient
/// of `h_tau`, `g` the control-cost gradient and `S = diag(G_t) + I/gamma`,
/// the dual optimality condition is `(H^-1 + J^T S^-1 J) z = H^-1 h - J^T S^-1 g`
/// and the step is `v = -S^-1 (J z + g)`. `J p` is one adjoint call, `J^T v`
/// one tangent call; `J z` is updated alongside the iterates, so the whole
/// step costs at most `2d + 1` calls.
pub fn gn_step_dual_with(oracle: &mut Oracle<'_>, tape: &ForwardTape, gamma: f64) -> Result<StepReport> {
    let problem = oracle.problem();
    if !problem.is_final_state_only() {
        return Err(Error::UnsupportedStructure("the dual step needs a final-state cost only"));
    }
    let tau = problem.horizon();
    let (d, p) = (problem.state_dim(), problem.control_dim());
    let final_cost = problem.state_cost(tau);
    if !final_cost.is_quadratic() || (0..tau).any(|t| !problem.control_cost(t).is_quadratic()) {
        return Err(Error::UnsupportedStructure("the dual step needs quadratic costs"));
    }
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::InvalidConfig(format!("step size must be positive, got {gamma}")));
    }
    let start = oracle.counter();
    let u = tape.command();
    let x_last = tape.trajectory().last();
    let h_chol = Cholesky::new(final_cost.hessian(&x_last))
        .ok_or(Error::UnsupportedStructure("the dual step needs a positive definite final-state Hessian"))?;
    let h_x = final_cost.gradient(&x_last);
    let mut g = DVector::zeros(tau * p);
    for t in 0..tau {
        g.rows_mut(t * p, p).copy_from(&problem.control_cost(t).gradient(&u.step(t)));
    }
    let metric = ControlMetric::new(problem, u, gamma)?;

    let jt = |oracle: &mut Oracle<'_>, v: &DVector<f64>| -> Result<DVector<f64>> {
        let y = oracle.tangent_product(tape, v)?;
        Ok(y.rows((tau - 1) * d, d).into_owned())
    };

    // b = H^-1 h - J^T S^-1 g
    let mut b = h_chol.solve(&h_x);
    if g.iter().any(|v| *v != 0.0) {
        b -= jt(oracle, &metric.solve(&g))?;
    }

    let mut z = DVector::zeros(d);
    let mut jz = DVector::zeros(tau * p);
    let mut r = b;
    let mut dir = r.clone();
    let mut rr = r.norm_squared();
    let mut iterations = 0;
    while iterations < d && rr.sqrt() >= 1e-12 {
        let jp = oracle.adjoint_product(tape, &last_block_embedding(tau, d, &dir))?;
        let a_dir = h_chol.solve(&dir) + jt(oracle, &metric.solve(&jp))?;
        let curvature = dir.dot(&a_dir);
        if curvature <= 0.0 || !curvature.is_finite() {
            break;
        }
        let step = rr / curvature;
        z.axpy(step, &dir, 1.0);
        jz.axpy(step, &jp, 1.0);
        r.axpy(-step, &a_dir, 1.0);
        let rr_next = r.norm_squared();
        dir = &r + &dir * (rr_next / rr);
        rr = rr_next;
        iterations += 1;
    }
    oracle.count_model_solve();

    let v = -metric.solve(&(jz + &g));
    // At the dual optimum J^T v = H^-1 (z - h), which spares a tangent call.
    let y_last = h_chol.solve(&(&z - &h_x));
    let h_xx = final_cost.hessian(&x_last);
    let mut change = h_x.dot(&y_last) + 0.5 * y_last.dot(&(&h_xx * &y_last));
    for t in 0..tau {
        let ut = u.step(t);
        let vt = v.rows(t * p, p);
        let cost = problem.control_cost(t);
        change += cost.gradient(&ut).dot(&vt) + 0.5 * vt.dot(&(cost.hessian(&ut) * vt));
    }
    Ok(StepReport {
        command: u.offset(&v, 1.0),
        direction: v,
        predicted_decrease: -change,
        step_size: gamma,
        inner_iterations: iterations,
        oracle_calls: oracle.counter().since(&start),
    })
}

pub fn gn_step_dual(problem: &ControlProblem, u: &Command, gamma: f64) -> Result<StepReport> {
    let mut oracle = Oracle::new(problem);
    let tape = oracle.record(u, DerivativeOrder::First)?;
    let mut report = gn_step_dual_with(&mut oracle, &tape, gamma)?;
    report.oracle_calls = oracle.counter();
    Ok(report)
}
