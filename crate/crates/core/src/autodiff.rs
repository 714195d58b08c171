//! Automatic-differentiation oracle for trajectory functions.
//!
//! A [`ForwardTape`] stores the dynamics derivatives along one rollout. Given
//! a tape, the adjoint product `z -> grad x(u) z` is one backward sweep and
//! the tangent product `v -> grad x(u)^T v` is one forward sweep of the
//! linearized dynamics; neither materializes the `tau p x tau d` Jacobian.
//! Calls are counted by the [`Oracle`] that owns the tape.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::problem::{Command, ControlProblem, SecondDerivatives, Trajectory};

/// Which dynamics derivatives a recording stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
}

/// Oracle-call accounting for one solver run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleCounter {
    pub adjoint_calls: u64,
    pub tangent_calls: u64,
    pub tape_recordings: u64,
    /// Linear-quadratic subproblem solves run on an existing tape.
    pub model_solves: u64,
}

impl OracleCounter {
    /// Adjoint plus tangent products.
    pub fn autodiff_calls(&self) -> u64 {
        self.adjoint_calls + self.tangent_calls
    }

    pub fn total(&self) -> u64 {
        self.adjoint_calls + self.tangent_calls + self.tape_recordings + self.model_solves
    }

    /// Calls made since `earlier`.
    pub fn since(&self, earlier: &OracleCounter) -> OracleCounter {
        OracleCounter {
            adjoint_calls: self.adjoint_calls - earlier.adjoint_calls,
            tangent_calls: self.tangent_calls - earlier.tangent_calls,
            tape_recordings: self.tape_recordings - earlier.tape_recordings,
            model_solves: self.model_solves - earlier.model_solves,
        }
    }
}

/// Noise derivatives at `w = 0` along a tape.
#[derive(Debug, Clone)]
pub struct NoiseDerivatives {
    /// `grad_w phi_t`, `q x d`.
    pub grad_w: Vec<DMatrix<f64>>,
    /// `(Psi_{t,1}, ..., Psi_{t,q})`, each `d x p`.
    pub cross: Vec<Vec<DMatrix<f64>>>,
}

/// Derivatives of the dynamics recorded along the rollout of a command.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    command: Command,
    trajectory: Trajectory,
    grad_x: Vec<DMatrix<f64>>,
    grad_u: Vec<DMatrix<f64>>,
    noise: Option<NoiseDerivatives>,
    second: Option<Vec<SecondDerivatives>>,
}

impl ForwardTape {
    fn record(problem: &ControlProblem, u: &Command, order: DerivativeOrder) -> Result<Self> {
        let trajectory = problem.rollout(u)?;
        let horizon = problem.horizon();
        let mut grad_x = Vec::with_capacity(horizon);
        let mut grad_u = Vec::with_capacity(horizon);
        let mut second = (order == DerivativeOrder::Second).then(|| Vec::with_capacity(horizon));
        let mut noise = (problem.noise_dim() > 0).then(|| NoiseDerivatives {
            grad_w: Vec::with_capacity(horizon),
            cross: Vec::with_capacity(horizon),
        });

        for t in 0..horizon {
            let phi = problem.dynamics(t);
            let x = trajectory.state(t);
            let ut = u.step(t);
            let (gx, gu) = phi.gradients(&x, &ut);
            grad_x.push(gx);
            grad_u.push(gu);
            if let Some(store) = second.as_mut() {
                let hess = phi
                    .second_derivatives(&x, &ut)
                    .ok_or(Error::MissingCapability("second derivatives"))?;
                store.push(hess);
            }
            if let Some(nd) = noise.as_mut() {
                match (phi.noise_gradient(&x, &ut), phi.noise_cross_derivatives(&x, &ut)) {
                    (Some(gw), Some(cross)) => {
                        nd.grad_w.push(gw);
                        nd.cross.push(cross);
                    }
                    _ => {
                        noise = None;
                    }
                }
            }
        }
        Ok(Self {
            command: u.clone(),
            trajectory,
            grad_x,
            grad_u,
            noise,
            second,
        })
    }

    pub fn command(&self) -> &Command {
        &self.command
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn horizon(&self) -> usize {
        self.grad_x.len()
    }

    pub fn state_dim(&self) -> usize {
        self.trajectory.dim()
    }

    pub fn control_dim(&self) -> usize {
        self.command.dim()
    }

    /// `Phi_{t,x} = grad_x phi_t(x_t, u_t)`.
    pub fn grad_x(&self, t: usize) -> &DMatrix<f64> {
        &self.grad_x[t]
    }

    /// `Phi_{t,u} = grad_u phi_t(x_t, u_t)`.
    pub fn grad_u(&self, t: usize) -> &DMatrix<f64> {
        &self.grad_u[t]
    }

    pub fn noise(&self) -> Option<&NoiseDerivatives> {
        self.noise.as_ref()
    }

    pub fn second_derivatives(&self, t: usize) -> Option<&SecondDerivatives> {
        self.second.as_ref().map(|s| &s[t])
    }

    pub fn has_second_derivatives(&self) -> bool {
        self.second.is_some()
    }

    /// `grad x(u) z` by the backward sweep `lambda_tau = z_tau`,
    /// `lambda_t = Phi_{t,x} lambda_{t+1} + z_t`, output block
    /// `t = Phi_{t,u} lambda_{t+1}`.
    pub(crate) fn apply_adjoint(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let (tau, d, p) = (self.horizon(), self.state_dim(), self.control_dim());
        check_len("adjoint input", tau * d, z.len())?;
        let mut out = DVector::zeros(tau * p);
        let mut lambda = z.rows((tau - 1) * d, d).into_owned();
        for t in (0..tau).rev() {
            out.rows_mut(t * p, p).copy_from(&(&self.grad_u[t] * &lambda));
            if t > 0 {
                lambda = &self.grad_x[t] * &lambda + z.rows((t - 1) * d, d);
            }
        }
        Ok(out)
    }

    /// `grad x(u)^T v` by the forward sweep `y_0 = 0`,
    /// `y_{t+1} = Phi_{t,x}^T y_t + Phi_{t,u}^T v_t`.
    pub(crate) fn apply_tangent(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let (tau, d, p) = (self.horizon(), self.state_dim(), self.control_dim());
        check_len("tangent input", tau * p, v.len())?;
        let mut out = DVector::zeros(tau * d);
        let mut y = DVector::zeros(d);
        for t in 0..tau {
            y = self.grad_x[t].tr_mul(&y) + self.grad_u[t].tr_mul(&v.rows(t * p, p));
            out.rows_mut(t * d, d).copy_from(&y);
        }
        Ok(out)
    }
}

/// Oracle context: records tapes and evaluates products on them for one
/// problem, counting every call.
pub struct Oracle<'p> {
    problem: &'p ControlProblem,
    counter: OracleCounter,
}

impl<'p> Oracle<'p> {
    pub fn new(problem: &'p ControlProblem) -> Self {
        Self {
            problem,
            counter: OracleCounter::default(),
        }
    }

    pub fn problem(&self) -> &'p ControlProblem {
        self.problem
    }

    pub fn counter(&self) -> OracleCounter {
        self.counter
    }

    pub(crate) fn count_model_solve(&mut self) {
        self.counter.model_solves += 1;
    }

    /// Roll out `u` and store the dynamics derivatives along the way. One
    /// recording counts once whatever the derivative order.
    pub fn record(&mut self, u: &Command, order: DerivativeOrder) -> Result<ForwardTape> {
        let tape = ForwardTape::record(self.problem, u, order)?;
        self.counter.tape_recordings += 1;
        Ok(tape)
    }

    pub fn adjoint_product(&mut self, tape: &ForwardTape, z: &DVector<f64>) -> Result<DVector<f64>> {
        let out = tape.apply_adjoint(z)?;
        self.counter.adjoint_calls += 1;
        Ok(out)
    }

    pub fn tangent_product(&mut self, tape: &ForwardTape, v: &DVector<f64>) -> Result<DVector<f64>> {
        let out = tape.apply_tangent(v)?;
        self.counter.tangent_calls += 1;
        Ok(out)
    }

    /// `grad f(u) = grad x(u) grad h(x) + grad g(u)`: one adjoint call.
    pub fn objective_gradient(&mut self, tape: &ForwardTape) -> Result<DVector<f64>> {
        let problem = self.problem;
        let (tau, d, p) = (problem.horizon(), problem.state_dim(), problem.control_dim());
        let traj = tape.trajectory();
        let mut z = DVector::zeros(tau * d);
        for t in 1..=tau {
            z.rows_mut((t - 1) * d, d)
                .copy_from(&problem.state_cost(t).gradient(&traj.state(t)));
        }
        let mut grad = self.adjoint_product(tape, &z)?;
        for t in 0..tau {
            let gu = problem.control_cost(t).gradient(&tape.command().step(t));
            let mut block = grad.rows_mut(t * p, p);
            block += gu;
        }
        Ok(grad)
    }

    /// Objective value (a rollout, not an oracle call).
    pub fn objective(&self, u: &Command) -> Result<f64> {
        self.problem.objective(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::QuadraticCost;
    use crate::dynamics::LinearDynamics;
    use std::sync::Arc;

    fn identity_problem(horizon: usize, d: usize) -> ControlProblem {
        let phi = Arc::new(LinearDynamics::new(DMatrix::identity(d, d), DMatrix::identity(d, d)));
        let half = Arc::new(QuadraticCost::new(DMatrix::identity(d, d), DVector::zeros(d), 0.0));
        let zero = Arc::new(QuadraticCost::zero(d));
        ControlProblem::time_invariant(horizon, DVector::zeros(d), phi, zero.clone(), half, zero).unwrap()
    }

    #[test]
    fn identity_tape_stores_identities() {
        let p = identity_problem(3, 2);
        let mut oracle = Oracle::new(&p);
        let tape = oracle.record(&p.zero_command(), DerivativeOrder::First).unwrap();
        for t in 0..3 {
            assert_eq!(tape.grad_x(t), &DMatrix::identity(2, 2));
            assert_eq!(tape.grad_u(t), &DMatrix::identity(2, 2));
        }
        assert_eq!(oracle.counter().tape_recordings, 1);
    }

    #[test]
    fn tangent_through_identity() {
        let p = identity_problem(2, 1);
        let mut oracle = Oracle::new(&p);
        let tape = oracle.record(&p.zero_command(), DerivativeOrder::First).unwrap();
        let y = oracle
            .tangent_product(&tape, &DVector::from_vec(vec![1.0, 0.0]))
            .unwrap();
        assert_eq!(y.as_slice(), &[1.0, 1.0]);
        assert_eq!(oracle.counter().tangent_calls, 1);
    }

    #[test]
    fn zero_inputs_map_to_zero() {
        let p = identity_problem(4, 2);
        let mut oracle = Oracle::new(&p);
        let tape = oracle.record(&p.zero_command(), DerivativeOrder::First).unwrap();
        assert_eq!(oracle.adjoint_product(&tape, &DVector::zeros(8)).unwrap().norm(), 0.0);
        assert_eq!(oracle.tangent_product(&tape, &DVector::zeros(8)).unwrap().norm(), 0.0);
    }

    #[test]
    fn single_step_adjoint_is_control_gradient_times_z() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, -0.3, 2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
        let phi = Arc::new(LinearDynamics::new(a, b.clone()));
        let zero = Arc::new(QuadraticCost::zero(2));
        let p = ControlProblem::time_invariant(1, DVector::zeros(2), phi, zero.clone(), zero, Arc::new(QuadraticCost::zero(1)))
            .unwrap();
        let mut oracle = Oracle::new(&p);
        let tape = oracle.record(&p.zero_command(), DerivativeOrder::First).unwrap();
        let z = DVector::from_vec(vec![2.0, -1.0]);
        let out = oracle.adjoint_product(&tape, &z).unwrap();
        assert_eq!(out, b.transpose() * z);
    }

    #[test]
    fn gradient_of_half_squared_norm() {
        let p = identity_problem(1, 1);
        let mut oracle = Oracle::new(&p);
        let u = Command::from_flat(DVector::from_vec(vec![1.7]), 1).unwrap();
        let tape = oracle.record(&u, DerivativeOrder::First).unwrap();
        let g = oracle.objective_gradient(&tape).unwrap();
        assert!((g[0] - 1.7).abs() < 1e-15);
    }

    #[test]
    fn second_order_recording_requires_capability() {
        struct FirstOrderOnly;
        impl crate::problem::Dynamics for FirstOrderOnly {
            fn state_dim(&self) -> usize {
                1
            }
            fn control_dim(&self) -> usize {
                1
            }
            fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
                x + u
            }
            fn gradients(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
                (DMatrix::identity(1, 1), DMatrix::identity(1, 1))
            }
        }
        let zero = Arc::new(QuadraticCost::zero(1));
        let p = ControlProblem::time_invariant(2, DVector::zeros(1), Arc::new(FirstOrderOnly), zero.clone(), zero.clone(), zero)
            .unwrap();
        let mut oracle = Oracle::new(&p);
        assert!(oracle.record(&p.zero_command(), DerivativeOrder::First).is_ok());
        assert_eq!(
            oracle.record(&p.zero_command(), DerivativeOrder::Second).unwrap_err(),
            Error::MissingCapability("second derivatives")
        );
    }

    #[test]
    fn adjoint_rejects_wrong_length() {
        let p = identity_problem(2, 2);
        let mut oracle = Oracle::new(&p);
        let tape = oracle.record(&p.zero_command(), DerivativeOrder::First).unwrap();
        assert!(oracle.adjoint_product(&tape, &DVector::zeros(3)).is_err());
        assert_eq!(oracle.counter().adjoint_calls, 0);
    }
}
