//! Benchmark environments: pendulum swing-up, two-link arm reaching and a
//! seeded generator of random linear-quadratic problems.
//!
//! Continuous dynamics are discretized with an explicit Euler step of length
//! `dt`; the horizon is `ceil(horizon_time / dt)` steps. Control penalties
//! carry the factor `dt` so that their sum approximates the integral cost.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::costs::QuadraticCost;
use crate::dynamics::{FdMode, FiniteDifference, LinearDynamics};
use crate::error::{Error, Result};
use crate::problem::{ControlProblem, CostFunction, Dynamics, OutputHessians, SecondDerivatives};

fn steps_for(horizon_time: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && horizon_time > 0.0) {
        return Err(Error::InvalidProblem("time step and horizon must be positive".into()));
    }
    Ok((horizon_time / dt - 1e-9).ceil().max(1.0) as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub friction: f64,
    pub gravity: f64,
    pub dt: f64,
    pub horizon_time: f64,
    /// Weight of the final angular velocity.
    pub lambda1: f64,
    /// Weight of the control energy.
    pub lambda2: f64,
    pub initial_state: [f64; 2],
    /// Replace the closed-form derivatives by finite differences.
    pub finite_difference: bool,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 1.0,
            friction: 0.01,
            gravity: 9.81,
            dt: 0.05,
            horizon_time: 5.0,
            lambda1: 0.1,
            lambda2: 0.01,
            initial_state: [0.0, 0.0],
            finite_difference: false,
        }
    }
}

impl PendulumParams {
    /// Parameters with `dt = horizon_time / steps`.
    pub fn with_steps(steps: usize) -> Self {
        let base = Self::default();
        Self {
            dt: base.horizon_time / steps as f64,
            ..base
        }
    }

    pub fn steps(&self) -> Result<usize> {
        steps_for(self.horizon_time, self.dt)
    }

    fn validate(&self) -> Result<()> {
        let positive = [self.mass, self.length, self.gravity, self.dt, self.horizon_time, self.lambda1, self.lambda2];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.friction >= 0.0) {
            return Err(Error::InvalidProblem("pendulum parameters must be positive (friction nonnegative)".into()));
        }
        Ok(())
    }
}

/// Euler-discretized pendulum, state `(theta, omega)`, torque control.
#[derive(Debug, Clone, PartialEq)]
pub struct Pendulum {
    params: PendulumParams,
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Self {
        Self { params }
    }

    fn inertia(&self) -> f64 {
        self.params.mass * self.params.length * self.params.length
    }

    /// Angular acceleration.
    pub fn acceleration(&self, theta: f64, omega: f64, torque: f64) -> f64 {
        let p = &self.params;
        -(p.gravity / p.length) * theta.sin() - p.friction / self.inertia() * omega + torque / self.inertia()
    }
}

impl Dynamics for Pendulum {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let dt = self.params.dt;
        let acc = self.acceleration(x[0], x[1], u[0]);
        DVector::from_vec(vec![x[0] + dt * x[1], x[1] + dt * acc])
    }

    fn gradients(&self, x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = &self.params;
        let dt = p.dt;
        let jac_x = DMatrix::from_row_slice(
            2,
            2,
            &[
                1.0,
                dt,
                -dt * (p.gravity / p.length) * x[0].cos(),
                1.0 - dt * p.friction / self.inertia(),
            ],
        );
        let jac_u = DMatrix::from_row_slice(2, 1, &[0.0, dt / self.inertia()]);
        (jac_x.transpose(), jac_u.transpose())
    }

    fn second_derivatives(&self, x: &DVector<f64>, _u: &DVector<f64>) -> Option<SecondDerivatives> {
        let p = &self.params;
        let mut xx = OutputHessians::zeros(2, 2, 2);
        xx.blocks[1][(0, 0)] = p.dt * (p.gravity / p.length) * x[0].sin();
        Some(SecondDerivatives {
            xx,
            uu: OutputHessians::zeros(2, 1, 1),
            ux: OutputHessians::zeros(2, 1, 2),
        })
    }
}

/// Swing-up: final cost `(pi - theta)^2 + lambda1 omega^2`, control penalty
/// `lambda2 dt u^2` at every step.
pub fn pendulum_problem(params: &PendulumParams) -> Result<ControlProblem> {
    params.validate()?;
    let steps = params.steps()?;
    let dynamics: Arc<dyn Dynamics> = if params.finite_difference {
        Arc::new(FiniteDifference::new(Arc::new(Pendulum::new(params.clone())), FdMode::Full))
    } else {
        Arc::new(Pendulum::new(params.clone()))
    };
    let terminal = QuadraticCost::new(
        DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0 * params.lambda1])),
        DVector::from_vec(vec![-2.0 * PI, 0.0]),
        PI * PI,
    );
    ControlProblem::time_invariant(
        steps,
        DVector::from_row_slice(&params.initial_state),
        dynamics,
        Arc::new(QuadraticCost::zero(2)),
        Arc::new(terminal),
        Arc::new(QuadraticCost::squared_norm(1, params.lambda2 * params.dt)),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLinkArmParams {
    pub link_lengths: [f64; 2],
    pub inertias: [f64; 2],
    /// Mass of the distal link.
    pub mass2: f64,
    /// Distance from the elbow to the center of mass of the distal link.
    pub center_distance: f64,
    /// Joint friction matrix.
    pub friction: [[f64; 2]; 2],
    pub target: [f64; 2],
    pub lambda1: f64,
    pub lambda2: f64,
    pub dt: f64,
    pub horizon_time: f64,
    /// `(theta1, theta2, omega1, omega2)`.
    pub initial_state: [f64; 4],
    /// Replace the closed-form first derivatives by finite differences.
    pub finite_difference: bool,
}

impl Default for TwoLinkArmParams {
    fn default() -> Self {
        Self {
            link_lengths: [0.30, 0.33],
            inertias: [0.025, 0.045],
            mass2: 1.0,
            center_distance: 0.16,
            friction: [[0.05, 0.025], [0.025, 0.05]],
            target: [PI / 3.0, PI / 2.0],
            lambda1: 0.1,
            lambda2: 0.01,
            dt: 0.05,
            horizon_time: 5.0,
            initial_state: [0.0; 4],
            finite_difference: false,
        }
    }
}

impl TwoLinkArmParams {
    pub fn with_steps(steps: usize) -> Self {
        let base = Self::default();
        Self {
            dt: base.horizon_time / steps as f64,
            ..base
        }
    }

    pub fn steps(&self) -> Result<usize> {
        steps_for(self.horizon_time, self.dt)
    }

    /// `(a1, a2, a3)` with `a1 = k1 + k2 + m2 l1^2`, `a2 = m2 l1 d2`, `a3 = k2`.
    pub fn inertia_constants(&self) -> (f64, f64, f64) {
        let l1 = self.link_lengths[0];
        let a1 = self.inertias[0] + self.inertias[1] + self.mass2 * l1 * l1;
        let a2 = self.mass2 * l1 * self.center_distance;
        let a3 = self.inertias[1];
        (a1, a2, a3)
    }

    fn validate(&self) -> Result<()> {
        let (a1, a2, a3) = self.inertia_constants();
        if !(a1 > 0.0 && a2 > 0.0 && a3 > 0.0) {
            return Err(Error::InvalidProblem("arm inertia constants must be positive".into()));
        }
        // det M(theta2) = a1 a3 - a3^2 - a2^2 cos^2 theta2
        if a1 * a3 - a3 * a3 - a2 * a2 <= 0.0 {
            return Err(Error::InvalidProblem("arm mass matrix is not positive definite everywhere".into()));
        }
        if !(self.dt > 0.0 && self.horizon_time > 0.0 && self.lambda1 > 0.0 && self.lambda2 > 0.0) {
            return Err(Error::InvalidProblem("arm weights and times must be positive".into()));
        }
        Ok(())
    }
}

/// Euler-discretized two-link planar arm, state `(theta, omega)` in `R^4`,
/// joint torques in `R^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLinkArm {
    params: TwoLinkArmParams,
    a: (f64, f64, f64),
    friction: Matrix2<f64>,
}

impl TwoLinkArm {
    pub fn new(params: TwoLinkArmParams) -> Self {
        let a = params.inertia_constants();
        let f = params.friction;
        Self {
            friction: Matrix2::new(f[0][0], f[0][1], f[1][0], f[1][1]),
            params,
            a,
        }
    }

    pub fn mass_matrix(&self, theta2: f64) -> Matrix2<f64> {
        let (a1, a2, a3) = self.a;
        let c = theta2.cos();
        Matrix2::new(a1 + 2.0 * a2 * c, a3 + a2 * c, a3 + a2 * c, a3)
    }

    /// Centripetal and Coriolis forces.
    pub fn coriolis(&self, theta2: f64, omega: &Vector2<f64>) -> Vector2<f64> {
        let s = self.a.1 * theta2.sin();
        Vector2::new(-omega[1] * (2.0 * omega[0] + omega[1]) * s, omega[0] * omega[0] * s)
    }

    pub fn acceleration(&self, theta2: f64, omega: &Vector2<f64>, torque: &Vector2<f64>) -> Vector2<f64> {
        let rhs = torque - self.coriolis(theta2, omega) - self.friction * omega;
        self.mass_matrix(theta2)
            .cholesky()
            .expect("mass matrix is positive definite")
            .solve(&rhs)
    }

    fn split(x: &DVector<f64>, u: &DVector<f64>) -> (f64, Vector2<f64>, Vector2<f64>) {
        (x[1], Vector2::new(x[2], x[3]), Vector2::new(u[0], u[1]))
    }
}

impl Dynamics for TwoLinkArm {
    fn state_dim(&self) -> usize {
        4
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let dt = self.params.dt;
        let (theta2, omega, torque) = Self::split(x, u);
        let acc = self.acceleration(theta2, &omega, &torque);
        DVector::from_vec(vec![
            x[0] + dt * x[2],
            x[1] + dt * x[3],
            x[2] + dt * acc[0],
            x[3] + dt * acc[1],
        ])
    }

    fn gradients(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let dt = self.params.dt;
        let a2 = self.a.1;
        let (theta2, omega, torque) = Self::split(x, u);
        let (s, c) = theta2.sin_cos();
        let m_inv = self.mass_matrix(theta2).try_inverse().expect("mass matrix is positive definite");
        let acc = self.acceleration(theta2, &omega, &torque);

        let dm = Matrix2::new(-2.0 * a2 * s, -a2 * s, -a2 * s, 0.0);
        let dc_dtheta2 = Vector2::new(-omega[1] * (2.0 * omega[0] + omega[1]), omega[0] * omega[0]) * (a2 * c);
        let dacc_dtheta2 = -m_inv * (dm * acc + dc_dtheta2);
        let dc_domega = Matrix2::new(-2.0 * omega[1], -2.0 * (omega[0] + omega[1]), 2.0 * omega[0], 0.0) * (a2 * s);
        let dacc_domega = -m_inv * (dc_domega + self.friction);

        let mut jac_x = DMatrix::identity(4, 4);
        jac_x[(0, 2)] = dt;
        jac_x[(1, 3)] = dt;
        for i in 0..2 {
            jac_x[(2 + i, 1)] = dt * dacc_dtheta2[i];
            for j in 0..2 {
                jac_x[(2 + i, 2 + j)] += dt * dacc_domega[(i, j)];
            }
        }
        let mut jac_u = DMatrix::zeros(4, 2);
        for i in 0..2 {
            for j in 0..2 {
                jac_u[(2 + i, j)] = dt * m_inv[(i, j)];
            }
        }
        (jac_x.transpose(), jac_u.transpose())
    }
}

/// Reaching: final cost `||theta - target||^2 + lambda1 ||omega||^2`, control
/// penalty `lambda2 dt ||u||^2`. Second derivatives of the dynamics come
/// from finite differences of the Jacobians.
pub fn two_link_arm_problem(params: &TwoLinkArmParams) -> Result<ControlProblem> {
    params.validate()?;
    let steps = params.steps()?;
    let arm: Arc<dyn Dynamics> = Arc::new(TwoLinkArm::new(params.clone()));
    let mode = if params.finite_difference {
        FdMode::Full
    } else {
        FdMode::SecondOrderOnly
    };
    let dynamics = Arc::new(FiniteDifference::new(arm, mode));
    let target = DVector::from_vec(vec![params.target[0], params.target[1], 0.0, 0.0]);
    let weight = DMatrix::from_diagonal(&DVector::from_vec(vec![
        2.0,
        2.0,
        2.0 * params.lambda1,
        2.0 * params.lambda1,
    ]));
    ControlProblem::time_invariant(
        steps,
        DVector::from_row_slice(&params.initial_state),
        dynamics,
        Arc::new(QuadraticCost::zero(4)),
        Arc::new(QuadraticCost::tracking(weight, &target)),
        Arc::new(QuadraticCost::squared_norm(2, params.lambda2 * params.dt)),
    )
}

/// Raw data of a random linear-quadratic problem: `x_{t+1} = A_t x_t + B_t u_t`,
/// state costs `1/2 (x_t - r_t)^T Q_t (x_t - r_t)` for `t = 1..tau` and control
/// costs `1/2 u_t^T R_t u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomLqInstance {
    pub initial_state: DVector<f64>,
    /// Forward-oriented `A_t`, `d x d`, `t = 0..tau-1`.
    pub a: Vec<DMatrix<f64>>,
    /// Forward-oriented `B_t`, `d x p`.
    pub b: Vec<DMatrix<f64>>,
    /// `Q_t` at index `t-1`, PSD.
    pub q: Vec<DMatrix<f64>>,
    /// Tracking targets `r_t` at index `t-1`.
    pub targets: Vec<DVector<f64>>,
    /// `R_t`, PD.
    pub r: Vec<DMatrix<f64>>,
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

impl RandomLqInstance {
    pub fn generate(horizon: usize, d: usize, p: usize, seed: u64, spectral_cap: f64) -> Result<Self> {
        if horizon == 0 || d == 0 || p == 0 {
            return Err(Error::InvalidProblem("random LQ dimensions must be positive".into()));
        }
        if !(spectral_cap > 0.0 && spectral_cap < 1.2) {
            return Err(Error::InvalidConfig(format!("spectral cap must lie in (0, 1.2), got {spectral_cap}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inst = Self {
            initial_state: DVector::from_fn(d, |_, _| rng.sample(StandardNormal)),
            a: Vec::with_capacity(horizon),
            b: Vec::with_capacity(horizon),
            q: Vec::with_capacity(horizon),
            targets: Vec::with_capacity(horizon),
            r: Vec::with_capacity(horizon),
        };
        for _ in 0..horizon {
            let raw = normal_matrix(&mut rng, d, d);
            let norm = raw.clone().singular_values().max();
            let scale = spectral_cap * rng.random_range(0.5..1.0) / norm.max(f64::MIN_POSITIVE);
            inst.a.push(raw * scale);
            inst.b.push(normal_matrix(&mut rng, d, p));
            let l = normal_matrix(&mut rng, d, d);
            inst.q.push(&l * l.transpose() / d as f64);
            inst.targets.push(DVector::from_fn(d, |_, _| rng.sample(StandardNormal)));
            let m = normal_matrix(&mut rng, p, p);
            inst.r.push(&m * m.transpose() / p as f64 + DMatrix::identity(p, p) * 0.1);
        }
        Ok(inst)
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    pub fn problem(&self) -> Result<ControlProblem> {
        let horizon = self.horizon();
        let p = self.b.first().map_or(0, |b| b.ncols());
        let mut dynamics: Vec<Arc<dyn Dynamics>> = Vec::with_capacity(horizon);
        let mut state_costs: Vec<Arc<dyn CostFunction>> = Vec::with_capacity(horizon);
        let mut control_costs: Vec<Arc<dyn CostFunction>> = Vec::with_capacity(horizon);
        for t in 0..horizon {
            dynamics.push(Arc::new(LinearDynamics::new(self.a[t].clone(), self.b[t].clone())));
            state_costs.push(Arc::new(QuadraticCost::tracking(self.q[t].clone(), &self.targets[t])));
            control_costs.push(Arc::new(QuadraticCost::new(self.r[t].clone(), DVector::zeros(p), 0.0)));
        }
        ControlProblem::new(self.initial_state.clone(), dynamics, state_costs, control_costs)
    }
}

/// Random time-varying linear-quadratic problem with `||A_t||_2 <= spectral_cap`.
pub fn random_lq_problem(horizon: usize, d: usize, p: usize, seed: u64, spectral_cap: f64) -> Result<ControlProblem> {
    RandomLqInstance::generate(horizon, d, p, seed, spectral_cap)?.problem()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;

    #[test]
    fn pendulum_dimensions() {
        let p = pendulum_problem(&PendulumParams::default()).unwrap();
        assert_eq!((p.state_dim(), p.control_dim(), p.horizon()), (2, 1, 100));
        assert!(p.is_final_state_only());
    }

    #[test]
    fn pendulum_rest_is_equilibrium() {
        let pend = Pendulum::new(PendulumParams::default());
        let x = pend.step(&DVector::zeros(2), &DVector::zeros(1));
        assert_eq!(x, DVector::zeros(2));
    }

    #[test]
    fn pendulum_unit_acceleration() {
        let params = PendulumParams {
            friction: 0.0,
            ..Default::default()
        };
        let inertia = params.mass * params.length * params.length;
        let pend = Pendulum::new(params);
        assert_eq!(pend.acceleration(0.0, 0.0, inertia), 1.0);
    }

    #[test]
    fn pendulum_hand_stepped_rollout() {
        let params = PendulumParams {
            horizon_time: 0.25,
            ..Default::default()
        };
        let p = pendulum_problem(&params).unwrap();
        assert_eq!(p.horizon(), 5);
        let traj = p.rollout(&crate::problem::Command::from_flat(DVector::from_element(5, 1.0), 1).unwrap()).unwrap();
        let (mut th, mut om) = (0.0f64, 0.0f64);
        for _ in 0..5 {
            let acc = -9.81 * th.sin() - 0.01 * om + 1.0;
            th += 0.05 * om;
            om += 0.05 * acc;
        }
        let last = traj.last();
        assert!((last[0] - th).abs() < 1e-15 && (last[1] - om).abs() < 1e-15);
    }

    #[test]
    fn arm_mass_matrix_at_zero_elbow() {
        let arm = TwoLinkArm::new(TwoLinkArmParams::default());
        let (a1, a2, a3) = TwoLinkArmParams::default().inertia_constants();
        assert!((a1 - 0.16).abs() < 1e-15 && (a2 - 0.048).abs() < 1e-15 && (a3 - 0.045).abs() < 1e-15);
        let m = arm.mass_matrix(0.0);
        let expected = Matrix2::new(0.256, 0.093, 0.093, 0.045);
        assert!((m - expected).abs().max() < 1e-15);
    }

    #[test]
    fn arm_coriolis_vanishes_at_rest() {
        let arm = TwoLinkArm::new(TwoLinkArmParams::default());
        for theta2 in [-2.0, 0.3, 1.7] {
            assert_eq!(arm.coriolis(theta2, &Vector2::zeros()), Vector2::zeros());
        }
    }

    #[test]
    fn arm_jacobians_match_finite_differences() {
        let arm = TwoLinkArm::new(TwoLinkArmParams::default());
        let x = DVector::from_vec(vec![0.4, -1.1, 0.7, -0.3]);
        let u = DVector::from_vec(vec![0.2, -0.5]);
        let (gx, gu) = arm.gradients(&x, &u);
        let jx = fd::jacobian(|xx| arm.step(xx, &u), &x);
        let ju = fd::jacobian(|uu| arm.step(&x, uu), &u);
        assert!((gx.transpose() - jx).abs().max() < 1e-8);
        assert!((gu.transpose() - ju).abs().max() < 1e-8);
    }

    #[test]
    fn random_lq_is_reproducible() {
        let a = RandomLqInstance::generate(5, 3, 2, 11, 1.0).unwrap();
        let b = RandomLqInstance::generate(5, 3, 2, 11, 1.0).unwrap();
        assert_eq!(a, b);
        for m in &a.a {
            assert!(m.clone().singular_values().max() <= 1.0 + 1e-12);
        }
        assert!(RandomLqInstance::generate(5, 3, 2, 11, 1.5).is_err());
    }
}
