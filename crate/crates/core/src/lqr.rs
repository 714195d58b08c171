//! Dynamic programming for linear-quadratic control subproblems.
//!
//! A subproblem has linear dynamics `y_{t+1} = Phi_{t,x}^T y_t + Phi_{t,u}^T v_t`
//! from `y_0 = 0`, quadratic state costs `h_{t,x}^T y + 1/2 y^T H_t y` for
//! `t = 1..tau` and control costs `g_{t,u}^T v + 1/2 v^T G_t v + 1/(2 gamma) ||v||^2`
//! for `t = 0..tau-1`. Constant terms of the cost-to-go are dropped.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::autodiff::ForwardTape;
use crate::error::{check_len, Error, Result};
use crate::problem::ControlProblem;

/// Gaussian-noise terms of a linearized noisy step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTerms {
    /// `Phi_{t,w}`, `q x d`; its rows are `psi_{t,i}`.
    pub grad_w: Vec<DMatrix<f64>>,
    /// `(Psi_{t,1}, ..., Psi_{t,q})`, each `d x p`.
    pub cross: Vec<Vec<DMatrix<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqSubproblem {
    /// `Phi_{t,x}`, `d x d`, `t = 0..tau-1`.
    pub grad_x: Vec<DMatrix<f64>>,
    /// `Phi_{t,u}`, `p x d`, `t = 0..tau-1`.
    pub grad_u: Vec<DMatrix<f64>>,
    /// `h_{t,x}` at index `t-1`, `t = 1..tau`.
    pub state_linear: Vec<DVector<f64>>,
    /// `H_{t,xx}` at index `t-1`.
    pub state_hessian: Vec<DMatrix<f64>>,
    /// `g_{t,u}`, `t = 0..tau-1`.
    pub control_linear: Vec<DVector<f64>>,
    /// `G_{t,uu}`.
    pub control_hessian: Vec<DMatrix<f64>>,
    /// Proximal step size; `f64::INFINITY` disables the proximal term.
    pub gamma: f64,
    pub noise: Option<NoiseTerms>,
}

impl LqSubproblem {
    /// Linearize `problem` along a recorded tape: tape Jacobians plus
    /// second-order expansions of the costs. Noise terms are left out.
    pub fn from_tape(problem: &ControlProblem, tape: &ForwardTape, gamma: f64) -> Self {
        let tau = problem.horizon();
        let traj = tape.trajectory();
        let u = tape.command();
        let mut state_linear = Vec::with_capacity(tau);
        let mut state_hessian = Vec::with_capacity(tau);
        let mut control_linear = Vec::with_capacity(tau);
        let mut control_hessian = Vec::with_capacity(tau);
        for t in 1..=tau {
            let x = traj.state(t);
            let h = problem.state_cost(t);
            state_linear.push(h.gradient(&x));
            state_hessian.push(h.hessian(&x));
        }
        for t in 0..tau {
            let ut = u.step(t);
            let g = problem.control_cost(t);
            control_linear.push(g.gradient(&ut));
            control_hessian.push(g.hessian(&ut));
        }
        Self {
            grad_x: (0..tau).map(|t| tape.grad_x(t).clone()).collect(),
            grad_u: (0..tau).map(|t| tape.grad_u(t).clone()).collect(),
            state_linear,
            state_hessian,
            control_linear,
            control_hessian,
            gamma,
            noise: None,
        }
    }

    /// Attach the noise terms stored on the tape. Problems without noise get
    /// an empty (`q = 0`) set of terms.
    pub fn with_tape_noise(mut self, tape: &ForwardTape, noise_dim: usize) -> Result<Self> {
        let terms = match tape.noise() {
            Some(nd) => NoiseTerms {
                grad_w: nd.grad_w.clone(),
                cross: nd.cross.clone(),
            },
            None if noise_dim == 0 => NoiseTerms {
                grad_w: vec![DMatrix::zeros(0, self.state_dim()); self.horizon()],
                cross: vec![Vec::new(); self.horizon()],
            },
            None => return Err(Error::MissingCapability("noise derivatives")),
        };
        self.noise = Some(terms);
        Ok(self)
    }

    pub fn horizon(&self) -> usize {
        self.grad_x.len()
    }

    pub fn state_dim(&self) -> usize {
        self.grad_x.first().map_or(0, |m| m.nrows())
    }

    pub fn control_dim(&self) -> usize {
        self.grad_u.first().map_or(0, |m| m.nrows())
    }

    fn inverse_gamma(&self) -> f64 {
        if self.gamma.is_infinite() {
            0.0
        } else {
            1.0 / self.gamma
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tau = self.horizon();
        if tau == 0 {
            return Err(Error::InvalidProblem("empty subproblem".into()));
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {}", self.gamma)));
        }
        let (d, p) = (self.state_dim(), self.control_dim());
        check_len("subproblem grad_u count", tau, self.grad_u.len())?;
        check_len("subproblem state cost count", tau, self.state_linear.len())?;
        check_len("subproblem state Hessian count", tau, self.state_hessian.len())?;
        check_len("subproblem control cost count", tau, self.control_linear.len())?;
        check_len("subproblem control Hessian count", tau, self.control_hessian.len())?;
        for t in 0..tau {
            check_len("grad_x shape", d * d, self.grad_x[t].nrows() * self.grad_x[t].ncols())?;
            check_len("grad_u columns", d, self.grad_u[t].ncols())?;
            check_len("grad_u rows", p, self.grad_u[t].nrows())?;
            check_len("state linear term", d, self.state_linear[t].len())?;
            check_len("state Hessian shape", d * d, self.state_hessian[t].len())?;
            check_len("control linear term", p, self.control_linear[t].len())?;
            check_len("control Hessian shape", p * p, self.control_hessian[t].len())?;
        }
        if let Some(noise) = &self.noise {
            check_len("noise gradient count", tau, noise.grad_w.len())?;
            check_len("noise cross-derivative count", tau, noise.cross.len())?;
            for t in 0..tau {
                let q = noise.grad_w[t].nrows();
                check_len("noise cross-derivative terms", q, noise.cross[t].len())?;
            }
        }
        Ok(())
    }

    /// Change of the quadratic model `q_f(u + v; u) - f(u)` for a step `v`
    /// whose linearized trajectory is `y` (flat `(y_1; ...; y_tau)`),
    /// without the proximal term.
    pub fn model_change(&self, v: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let (tau, d, p) = (self.horizon(), self.state_dim(), self.control_dim());
        let mut total = 0.0;
        for t in 0..tau {
            let yt = y.rows(t * d, d);
            total += self.state_linear[t].dot(&yt) + 0.5 * yt.dot(&(&self.state_hessian[t] * yt));
            let vt = v.rows(t * p, p);
            total += self.control_linear[t].dot(&vt) + 0.5 * vt.dot(&(&self.control_hessian[t] * vt));
        }
        total
    }
}

/// Affine policy `v_t = K_t y_t + k_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackPolicy {
    /// `p x d`.
    pub gains: Vec<DMatrix<f64>>,
    pub offsets: Vec<DVector<f64>>,
}

/// Quadratic cost-to-go `1/2 y^T C_t y + c_t^T y` for `t = 0..tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostToGo {
    pub hessians: Vec<DMatrix<f64>>,
    pub linear: Vec<DVector<f64>>,
}

/// `W` and `w` blocks of one Bellman step, before minimizing over `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTerms {
    pub xx: DMatrix<f64>,
    pub ux: DMatrix<f64>,
    pub uu: DMatrix<f64>,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
}

impl StageTerms {
    /// Stage terms at step `t` given the next cost-to-go `(C', c')`, with the
    /// noise corrections when the subproblem carries noise terms and the
    /// proximal term added last.
    pub fn assemble(sub: &LqSubproblem, t: usize, next_hessian: &DMatrix<f64>, next_linear: &DVector<f64>) -> Self {
        let d = sub.state_dim();
        let p = sub.control_dim();
        let (phi_x, phi_u) = (&sub.grad_x[t], &sub.grad_u[t]);
        let c_phi_x = next_hessian * phi_x.transpose();
        let c_phi_u = next_hessian * phi_u.transpose();

        let (h_x, h_xx) = if t == 0 {
            (DVector::zeros(d), DMatrix::zeros(d, d))
        } else {
            (sub.state_linear[t - 1].clone(), sub.state_hessian[t - 1].clone())
        };
        let x = h_x + phi_x * next_linear;
        let xx = h_xx + phi_x * &c_phi_x;
        let ux = phi_u * &c_phi_x;
        let mut u = &sub.control_linear[t] + phi_u * next_linear;
        let mut uu = &sub.control_hessian[t] + phi_u * &c_phi_u;

        if let Some(noise) = &sub.noise {
            for (i, big_psi) in noise.cross[t].iter().enumerate() {
                let psi = noise.grad_w[t].row(i).transpose();
                let c_big_psi = next_hessian * big_psi;
                u += c_big_psi.tr_mul(&psi);
                uu += big_psi.tr_mul(&c_big_psi);
            }
        }
        let inv_gamma = sub.inverse_gamma();
        if inv_gamma != 0.0 {
            for i in 0..p {
                uu[(i, i)] += inv_gamma;
            }
        }
        Self { xx, ux, uu, x, u }
    }

    /// Cholesky factor of `W_uu`, or `None` if it is not numerically PD.
    pub fn factor_uu(&self) -> Option<Cholesky<f64, Dyn>> {
        if !self.uu.iter().all(|v| v.is_finite()) {
            return None;
        }
        Cholesky::new(self.uu.clone())
    }
}

/// `(K_t, k_t, C_t, c_t)`.
type Elimination = (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>);

/// One minimization step: policy `(K_t, k_t)` and cost-to-go `(C_t, c_t)`.
fn eliminate(t: usize, terms: &StageTerms) -> Result<Elimination> {
    let chol = terms.factor_uu().ok_or(Error::IllConditioned { t })?;
    let gain = -chol.solve(&terms.ux);
    let offset = -chol.solve(&terms.u);
    let hessian = &terms.xx + terms.ux.tr_mul(&gain);
    let hessian = (&hessian + hessian.transpose()) * 0.5;
    let linear = &terms.x + terms.ux.tr_mul(&offset);
    Ok((gain, offset, hessian, linear))
}

/// Backward recursion where `adjust` may modify the stage terms before each
/// minimization. It receives `t`, the terms and the next cost-to-go `(C', c')`.
pub fn backward_with(
    sub: &LqSubproblem,
    mut adjust: impl FnMut(usize, &mut StageTerms, &DMatrix<f64>, &DVector<f64>) -> Result<()>,
) -> Result<(FeedbackPolicy, CostToGo)> {
    sub.validate()?;
    let tau = sub.horizon();
    let mut gains = vec![DMatrix::zeros(0, 0); tau];
    let mut offsets = vec![DVector::zeros(0); tau];
    let mut hessians = vec![DMatrix::zeros(0, 0); tau + 1];
    let mut linear = vec![DVector::zeros(0); tau + 1];
    hessians[tau] = sub.state_hessian[tau - 1].clone();
    linear[tau] = sub.state_linear[tau - 1].clone();

    for t in (0..tau).rev() {
        let mut terms = StageTerms::assemble(sub, t, &hessians[t + 1], &linear[t + 1]);
        adjust(t, &mut terms, &hessians[t + 1], &linear[t + 1])?;
        let (k_mat, k_vec, c_mat, c_vec) = eliminate(t, &terms)?;
        gains[t] = k_mat;
        offsets[t] = k_vec;
        hessians[t] = c_mat;
        linear[t] = c_vec;
    }
    Ok((FeedbackPolicy { gains, offsets }, CostToGo { hessians, linear }))
}

/// Deterministic backward pass. Noise terms, if any, are ignored.
pub fn lq_backward(sub: &LqSubproblem) -> Result<(FeedbackPolicy, CostToGo)> {
    if sub.noise.is_some() {
        let plain = LqSubproblem {
            noise: None,
            ..sub.clone()
        };
        return backward_with(&plain, |_, _, _, _| Ok(()));
    }
    backward_with(sub, |_, _, _, _| Ok(()))
}

/// Backward pass of the Gaussian-noise model.
pub fn lqg_backward(sub: &LqSubproblem) -> Result<(FeedbackPolicy, CostToGo)> {
    if sub.noise.is_none() {
        return Err(Error::MissingCapability("noise derivatives"));
    }
    backward_with(sub, |_, _, _, _| Ok(()))
}

/// Roll the policy out on the linear dynamics from `y_0 = 0`. Returns
/// `(v, y)` with `y = (y_1; ...; y_tau)`.
pub fn lq_rollout(sub: &LqSubproblem, policy: &FeedbackPolicy) -> (DVector<f64>, DVector<f64>) {
    let (tau, d, p) = (sub.horizon(), sub.state_dim(), sub.control_dim());
    let mut v = DVector::zeros(tau * p);
    let mut y = DVector::zeros(tau * d);
    let mut yt = DVector::zeros(d);
    for t in 0..tau {
        let vt = &policy.gains[t] * &yt + &policy.offsets[t];
        yt = sub.grad_x[t].tr_mul(&yt) + sub.grad_u[t].tr_mul(&vt);
        v.rows_mut(t * p, p).copy_from(&vt);
        y.rows_mut(t * d, d).copy_from(&yt);
    }
    (v, y)
}

/// Backward pass followed by the roll-out.
pub fn lq_solve(sub: &LqSubproblem) -> Result<(DVector<f64>, DVector<f64>)> {
    let (policy, _) = lq_backward(sub)?;
    Ok(lq_rollout(sub, &policy))
}
