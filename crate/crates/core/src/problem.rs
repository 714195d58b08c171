//! Problem definition, rollout of the dynamics and evaluation of the composite
//! objective `f(u) = sum_t h_t(x_t(u)) + sum_t g_t(u_t)`.
//!
//! # Derivative convention
//!
//! Dynamics derivatives are exposed in *gradient* convention: for
//! `phi: R^d x R^p -> R^d`, `grad_x phi` is the `d x d` matrix whose column `i`
//! is the gradient of the `i`-th output, i.e. the transpose of the usual forward
//! Jacobian, and `grad_u phi` is `p x d`. A linearized step therefore reads
//! `y' = grad_x^T y + grad_u^T v`, and adjoints are propagated by plain
//! multiplication `lambda = grad_x lambda'`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};

/// Per-output second derivatives of a vector map `phi: R^n -> R^d`: entry `i`
/// is the Hessian block of `phi_i`. Contracting against a costate `c` gives
/// `phi[., ., c] = sum_i c_i * blocks[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputHessians {
    pub blocks: Vec<DMatrix<f64>>,
}

impl OutputHessians {
    pub fn zeros(outputs: usize, rows: usize, cols: usize) -> Self {
        Self {
            blocks: vec![DMatrix::zeros(rows, cols); outputs],
        }
    }

    pub fn contract(&self, costate: &DVector<f64>) -> DMatrix<f64> {
        let (r, c) = self.blocks.first().map_or((0, 0), |b| b.shape());
        let mut out = DMatrix::zeros(r, c);
        for (weight, block) in costate.iter().zip(&self.blocks) {
            if *weight != 0.0 {
                out += block * *weight;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|v| *v == 0.0))
    }
}

/// Second-order derivatives of one dynamics step.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivatives {
    /// `d` blocks of size `d x d`.
    pub xx: OutputHessians,
    /// `d` blocks of size `p x p`.
    pub uu: OutputHessians,
    /// `d` blocks of size `p x d` (`d^2 phi_i / du dx`).
    pub ux: OutputHessians,
}

/// One step `x_{t+1} = phi_t(x_t, u_t[, w_t])` of the dynamics.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn noise_dim(&self) -> usize {
        0
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// Noisy step; with the default implementation the noise is ignored.
    fn step_noisy(&self, x: &DVector<f64>, u: &DVector<f64>, _w: &DVector<f64>) -> DVector<f64> {
        self.step(x, u)
    }

    /// `(grad_x phi, grad_u phi)`, of shapes `d x d` and `p x d`.
    fn gradients(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>);

    /// `grad_w phi` at `w = 0`, shape `q x d`.
    fn noise_gradient(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// The shuffled cross derivative `(Psi_1, ..., Psi_q)` at `w = 0`, where
    /// `Psi_j = d^2 phi / du dw_j` is `d x p`.
    fn noise_cross_derivatives(
        &self,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
    ) -> Option<Vec<DMatrix<f64>>> {
        None
    }

    fn second_derivatives(
        &self,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
    ) -> Option<SecondDerivatives> {
        None
    }
}

/// A convex cost on states or controls.
pub trait CostFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// True if the cost is identically zero.
    fn is_zero(&self) -> bool {
        false
    }

    /// True if the cost is exactly quadratic, so that its second-order
    /// expansion is exact.
    fn is_quadratic(&self) -> bool {
        false
    }
}

/// A sequence of `horizon` vectors of equal length, stored contiguously with
/// the time index leading. Used for controls `u_0..u_{tau-1}` and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    values: DVector<f64>,
    dim: usize,
}

/// Noise realization `w_0..w_{tau-1}`, shaped like a command.
pub type NoiseSequence = Command;

impl Command {
    pub fn zeros(horizon: usize, dim: usize) -> Self {
        Self {
            values: DVector::zeros(horizon * dim),
            dim,
        }
    }

    pub fn from_flat(values: DVector<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                what: "flat command length",
                expected: dim,
                got: values.len(),
            });
        }
        Ok(Self { values, dim })
    }

    pub fn from_steps(steps: &[DVector<f64>]) -> Result<Self> {
        let dim = steps.first().map_or(0, |s| s.len());
        let mut values = DVector::zeros(steps.len() * dim);
        for (t, s) in steps.iter().enumerate() {
            check_len("command step", dim, s.len())?;
            values.rows_mut(t * dim, dim).copy_from(s);
        }
        Ok(Self { values, dim })
    }

    pub fn horizon(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, t: usize) -> DVectorView<'_, f64> {
        self.values.rows(t * self.dim, self.dim)
    }

    pub fn step(&self, t: usize) -> DVector<f64> {
        self.at(t).into_owned()
    }

    pub fn set_step(&mut self, t: usize, value: &DVector<f64>) {
        self.values.rows_mut(t * self.dim, self.dim).copy_from(value);
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.values
    }

    /// `self + scale * direction`, with `direction` a flat vector of the same length.
    pub fn offset(&self, direction: &DVector<f64>, scale: f64) -> Command {
        Command {
            values: &self.values + direction * scale,
            dim: self.dim,
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// States `x_1..x_tau` along a rollout, with the initial state kept apart.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    initial: DVector<f64>,
    states: DVector<f64>,
    dim: usize,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    /// State `x_t` for `t` in `0..=tau`; `t = 0` is the initial state.
    pub fn state(&self, t: usize) -> DVector<f64> {
        if t == 0 {
            self.initial.clone()
        } else {
            self.states.rows((t - 1) * self.dim, self.dim).into_owned()
        }
    }

    pub fn last(&self) -> DVector<f64> {
        self.state(self.horizon())
    }

    /// Flat `(x_1; ...; x_tau)`.
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.states
    }
}

/// A finite-horizon discrete-time control problem.
#[derive(Clone)]
pub struct ControlProblem {
    horizon: usize,
    state_dim: usize,
    control_dim: usize,
    noise_dim: usize,
    initial_state: DVector<f64>,
    dynamics: Vec<Arc<dyn Dynamics>>,
    state_costs: Vec<Arc<dyn CostFunction>>,
    control_costs: Vec<Arc<dyn CostFunction>>,
}

impl fmt::Debug for ControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem")
            .field("horizon", &self.horizon)
            .field("state_dim", &self.state_dim)
            .field("control_dim", &self.control_dim)
            .field("noise_dim", &self.noise_dim)
            .field("initial_state", &self.initial_state.as_slice())
            .finish_non_exhaustive()
    }
}

impl ControlProblem {
    /// `dynamics[t]` is `phi_t` for `t = 0..tau-1`, `state_costs[t-1]` is `h_t`
    /// for `t = 1..tau` and `control_costs[t]` is `g_t` for `t = 0..tau-1`.
    pub fn new(
        initial_state: DVector<f64>,
        dynamics: Vec<Arc<dyn Dynamics>>,
        state_costs: Vec<Arc<dyn CostFunction>>,
        control_costs: Vec<Arc<dyn CostFunction>>,
    ) -> Result<Self> {
        let horizon = dynamics.len();
        if horizon == 0 {
            return Err(Error::InvalidProblem("horizon must be positive".into()));
        }
        check_len("state cost count", horizon, state_costs.len())?;
        check_len("control cost count", horizon, control_costs.len())?;
        let state_dim = initial_state.len();
        if state_dim == 0 {
            return Err(Error::InvalidProblem("state dimension must be positive".into()));
        }
        let control_dim = dynamics[0].control_dim();
        if control_dim == 0 {
            return Err(Error::InvalidProblem("control dimension must be positive".into()));
        }
        let noise_dim = dynamics[0].noise_dim();
        for phi in &dynamics {
            check_len("dynamics state dimension", state_dim, phi.state_dim())?;
            check_len("dynamics control dimension", control_dim, phi.control_dim())?;
            check_len("dynamics noise dimension", noise_dim, phi.noise_dim())?;
        }
        for h in &state_costs {
            check_len("state cost dimension", state_dim, h.dim())?;
        }
        for g in &control_costs {
            check_len("control cost dimension", control_dim, g.dim())?;
        }
        Ok(Self {
            horizon,
            state_dim,
            control_dim,
            noise_dim,
            initial_state,
            dynamics,
            state_costs,
            control_costs,
        })
    }

    /// Same dynamics and control penalty at every step, a terminal cost on
    /// `x_tau` and optional running state cost on `x_1..x_{tau-1}`.
    pub fn time_invariant(
        horizon: usize,
        initial_state: DVector<f64>,
        dynamics: Arc<dyn Dynamics>,
        running_cost: Arc<dyn CostFunction>,
        terminal_cost: Arc<dyn CostFunction>,
        control_cost: Arc<dyn CostFunction>,
    ) -> Result<Self> {
        let mut state_costs = vec![running_cost; horizon];
        if let Some(last) = state_costs.last_mut() {
            *last = terminal_cost;
        }
        Self::new(
            initial_state,
            vec![dynamics; horizon],
            state_costs,
            vec![control_cost; horizon],
        )
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.initial_state
    }

    pub fn dynamics(&self, t: usize) -> &dyn Dynamics {
        self.dynamics[t].as_ref()
    }

    /// `h_t` for `t = 1..=tau`.
    pub fn state_cost(&self, t: usize) -> &dyn CostFunction {
        self.state_costs[t - 1].as_ref()
    }

    /// `g_t` for `t = 0..tau`.
    pub fn control_cost(&self, t: usize) -> &dyn CostFunction {
        self.control_costs[t].as_ref()
    }

    /// A copy with every dynamics map replaced through `wrap`.
    pub fn map_dynamics(&self, mut wrap: impl FnMut(Arc<dyn Dynamics>) -> Arc<dyn Dynamics>) -> Result<Self> {
        Self::new(
            self.initial_state.clone(),
            self.dynamics.iter().cloned().map(&mut wrap).collect(),
            self.state_costs.clone(),
            self.control_costs.clone(),
        )
    }

    /// True when only the terminal state cost `h_tau` is nonzero.
    pub fn is_final_state_only(&self) -> bool {
        self.state_costs[..self.horizon - 1].iter().all(|h| h.is_zero())
    }

    pub fn zero_command(&self) -> Command {
        Command::zeros(self.horizon, self.control_dim)
    }

    pub(crate) fn check_command(&self, u: &Command) -> Result<()> {
        check_len("command step dimension", self.control_dim, u.dim())?;
        check_len("command horizon", self.horizon, u.horizon())
    }

    /// `x_1 = phi_0(x0, u_0)`, `x_{t+1} = phi_t(x_t, u_t)`.
    pub fn rollout(&self, u: &Command) -> Result<Trajectory> {
        self.rollout_with(u, |t, x, ut| self.dynamics[t].step(x, ut))
    }

    /// Rollout of the noisy dynamics for a fixed noise realization.
    pub fn noisy_rollout(&self, u: &Command, w: &NoiseSequence) -> Result<Trajectory> {
        if self.noise_dim == 0 {
            if w.as_vector().iter().any(|v| *v != 0.0) {
                return Err(Error::Deterministic);
            }
            return self.rollout(u);
        }
        check_len("noise step dimension", self.noise_dim, w.dim())?;
        check_len("noise horizon", self.horizon, w.horizon())?;
        self.rollout_with(u, |t, x, ut| {
            self.dynamics[t].step_noisy(x, ut, &w.step(t))
        })
    }

    fn rollout_with(
        &self,
        u: &Command,
        mut step: impl FnMut(usize, &DVector<f64>, &DVector<f64>) -> DVector<f64>,
    ) -> Result<Trajectory> {
        self.check_command(u)?;
        let d = self.state_dim;
        let mut states = DVector::zeros(self.horizon * d);
        let mut x = self.initial_state.clone();
        for t in 0..self.horizon {
            x = step(t, &x, &u.step(t));
            check_len("dynamics output", d, x.len())?;
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::Diverged { t: t + 1 });
            }
            states.rows_mut(t * d, d).copy_from(&x);
        }
        Ok(Trajectory {
            initial: self.initial_state.clone(),
            states,
            dim: d,
        })
    }

    /// `sum_t h_t(x_t)` along a trajectory.
    pub fn state_cost_total(&self, traj: &Trajectory) -> f64 {
        (1..=self.horizon)
            .map(|t| self.state_cost(t).value(&traj.state(t)))
            .sum()
    }

    /// `sum_t g_t(u_t)`.
    pub fn control_cost_total(&self, u: &Command) -> f64 {
        (0..self.horizon)
            .map(|t| self.control_cost(t).value(&u.step(t)))
            .sum()
    }

    /// The composite objective `f(u) = h(x(u)) + g(u)`.
    pub fn objective(&self, u: &Command) -> Result<f64> {
        let traj = self.rollout(u)?;
        Ok(self.state_cost_total(&traj) + self.control_cost_total(u))
    }

    /// Monte Carlo estimate of `E_w[h(x(u, w))] + g(u)` under i.i.d. standard
    /// normal noise. Returns the sample mean and its standard error.
    pub fn monte_carlo_objective(&self, u: &Command, samples: usize, seed: u64) -> Result<(f64, f64)> {
        if self.noise_dim == 0 {
            return Err(Error::Deterministic);
        }
        if samples == 0 {
            return Err(Error::InvalidConfig("at least one sample is required".into()));
        }
        self.check_command(u)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let penalty = self.control_cost_total(u);
        let mut values = Vec::with_capacity(samples);
        for _ in 0..samples {
            let flat = DVector::from_fn(self.horizon * self.noise_dim, |_, _| {
                StandardNormal.sample(&mut rng)
            });
            let w = Command::from_flat(flat, self.noise_dim)?;
            let traj = self.noisy_rollout(u, &w)?;
            values.push(self.state_cost_total(&traj));
        }
        let n = samples as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_err = if samples > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Ok((mean + penalty, std_err))
    }
}
