//! Independent reference computations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trajopt::envs::RandomLqInstance;
use trajopt::{Command, ControlProblem, ForwardTape};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn random_command(rng: &mut ChaCha8Rng, problem: &ControlProblem, scale: f64) -> Command {
    let n = problem.horizon() * problem.control_dim();
    Command::from_flat(normal_vector(rng, n) * scale, problem.control_dim()).unwrap()
}

/// Forward-oriented Jacobian `dx/du` (`tau d x tau p`) of the trajectory map at
/// `u`, assembled from the per-step dynamics Jacobians by explicit products.
pub fn dense_trajectory_jacobian(problem: &ControlProblem, u: &Command) -> DMatrix<f64> {
    let (tau, d, p) = (problem.horizon(), problem.state_dim(), problem.control_dim());
    let mut x = problem.initial_state().clone();
    let mut a = Vec::with_capacity(tau);
    let mut b = Vec::with_capacity(tau);
    for t in 0..tau {
        let ut = u.step(t);
        let (gx, gu) = problem.dynamics(t).gradients(&x, &ut);
        a.push(gx.transpose());
        b.push(gu.transpose());
        x = problem.dynamics(t).step(&x, &ut);
    }
    let mut jac = DMatrix::zeros(tau * d, tau * p);
    for t in 0..tau {
        let mut block = b[t].clone();
        for s in (t + 1)..=tau {
            jac.view_mut(((s - 1) * d, t * p), (d, p)).copy_from(&block);
            if s < tau {
                block = &a[s] * block;
            }
        }
    }
    jac
}

/// Block-diagonal Hessians and gradients of the state and control costs at
/// `u`, flattened as `(x_1..x_tau)` and `(u_0..u_{tau-1})`.
pub fn dense_costs(
    problem: &ControlProblem,
    u: &Command,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let (tau, d, p) = (problem.horizon(), problem.state_dim(), problem.control_dim());
    let traj = problem.rollout(u).unwrap();
    let mut hh = DMatrix::zeros(tau * d, tau * d);
    let mut h = DVector::zeros(tau * d);
    let mut gg = DMatrix::zeros(tau * p, tau * p);
    let mut g = DVector::zeros(tau * p);
    for t in 1..=tau {
        let x = traj.state(t);
        let cost = problem.state_cost(t);
        hh.view_mut(((t - 1) * d, (t - 1) * d), (d, d)).copy_from(&cost.hessian(&x));
        h.rows_mut((t - 1) * d, d).copy_from(&cost.gradient(&x));
    }
    for t in 0..tau {
        let ut = u.step(t);
        let cost = problem.control_cost(t);
        gg.view_mut((t * p, t * p), (p, p)).copy_from(&cost.hessian(&ut));
        g.rows_mut(t * p, p).copy_from(&cost.gradient(&ut));
    }
    (hh, h, gg, g)
}

/// Regularized Gauss-Newton step from the explicit dense formula
/// `v = -(J^T H J + G + I/gamma)^{-1} (J^T h + g)` with forward Jacobian `J`.
pub fn dense_gn_step(problem: &ControlProblem, u: &Command, gamma: f64) -> DVector<f64> {
    let jac = dense_trajectory_jacobian(problem, u);
    let (hh, h, gg, g) = dense_costs(problem, u);
    let n = gg.nrows();
    let inv_gamma = if gamma.is_infinite() { 0.0 } else { 1.0 / gamma };
    let lhs = jac.transpose() * &hh * &jac + gg + DMatrix::identity(n, n) * inv_gamma;
    let rhs = jac.transpose() * h + g;
    -lhs.lu().solve(&rhs).unwrap()
}

/// Minimizer of a random LQ instance from its KKT system: states are
/// eliminated through `x = M u + m`, built by simulating the forward-oriented
/// matrices directly.
pub fn dense_lq_minimizer(inst: &RandomLqInstance) -> DVector<f64> {
    let tau = inst.horizon();
    let d = inst.initial_state.len();
    let p = inst.b[0].ncols();
    let mut m_mat = DMatrix::zeros(tau * d, tau * p);
    let mut m_vec = DVector::zeros(tau * d);
    let mut free = inst.initial_state.clone();
    for t in 0..tau {
        free = &inst.a[t] * free;
        m_vec.rows_mut(t * d, d).copy_from(&free);
        for s in 0..=t {
            let mut block = inst.b[s].clone();
            for r in (s + 1)..=t {
                block = &inst.a[r] * block;
            }
            m_mat.view_mut((t * d, s * p), (d, p)).copy_from(&block);
        }
    }
    let mut q_bar = DMatrix::zeros(tau * d, tau * d);
    let mut r_bar = DMatrix::zeros(tau * p, tau * p);
    let mut target = DVector::zeros(tau * d);
    for t in 0..tau {
        q_bar.view_mut((t * d, t * d), (d, d)).copy_from(&inst.q[t]);
        r_bar.view_mut((t * p, t * p), (p, p)).copy_from(&inst.r[t]);
        target.rows_mut(t * d, d).copy_from(&inst.targets[t]);
    }
    let lhs = m_mat.transpose() * &q_bar * &m_mat + r_bar;
    let rhs = -(m_mat.transpose() * &q_bar * (m_vec - target));
    lhs.cholesky().unwrap().solve(&rhs)
}

/// Central finite-difference gradient of the objective.
pub fn fd_objective_gradient(problem: &ControlProblem, u: &Command) -> DVector<f64> {
    let base = u.as_vector();
    let p = problem.control_dim();
    DVector::from_fn(base.len(), |k, _| {
        let h = 1e-6 * (1.0 + base[k].abs());
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[k] += h;
        minus[k] -= h;
        let fp = problem.objective(&Command::from_flat(plus, p).unwrap()).unwrap();
        let fm = problem.objective(&Command::from_flat(minus, p).unwrap()).unwrap();
        (fp - fm) / (2.0 * h)
    })
}

/// Linear computational graph: every node is a sum of matrix-vector products
/// of earlier nodes, or an input.
struct LinearGraph {
    nodes: Vec<(usize, Vec<(DMatrix<f64>, usize)>)>,
}

impl LinearGraph {
    fn input(&mut self, len: usize) -> usize {
        self.nodes.push((len, Vec::new()));
        self.nodes.len() - 1
    }

    fn node(&mut self, terms: Vec<(DMatrix<f64>, usize)>) -> usize {
        let len = terms[0].0.nrows();
        self.nodes.push((len, terms));
        self.nodes.len() - 1
    }

    /// Reverse sweep from output seeds; returns the adjoint of every node.
    fn reverse(&self, seeds: &[(usize, DVector<f64>)]) -> Vec<DVector<f64>> {
        let mut adj: Vec<DVector<f64>> = self.nodes.iter().map(|(len, _)| DVector::zeros(*len)).collect();
        for (id, seed) in seeds {
            adj[*id] += seed;
        }
        for id in (0..self.nodes.len()).rev() {
            let bar = adj[id].clone();
            for (mat, src) in &self.nodes[id].1 {
                adj[*src] += mat.tr_mul(&bar);
            }
        }
        adj
    }
}

/// `grad x(u)^T v` from two automatic-differentiation passes: the adjoint
/// sweep `z -> grad x(u) z` is recorded as a linear graph (first call), then
/// differentiated in reverse mode with seed `v` (second call).
pub fn two_adjoint_tangent(tape: &ForwardTape, v: &DVector<f64>) -> DVector<f64> {
    let (tau, d, p) = (tape.horizon(), tape.state_dim(), tape.control_dim());
    let mut graph = LinearGraph { nodes: Vec::new() };
    let z: Vec<usize> = (0..tau).map(|_| graph.input(d)).collect();
    let mut outputs = vec![0; tau];
    let mut lambda = z[tau - 1];
    for t in (0..tau).rev() {
        outputs[t] = graph.node(vec![(tape.grad_u(t).clone(), lambda)]);
        if t > 0 {
            lambda = graph.node(vec![
                (tape.grad_x(t).clone(), lambda),
                (DMatrix::identity(d, d), z[t - 1]),
            ]);
        }
    }
    let seeds: Vec<(usize, DVector<f64>)> = (0..tau)
        .map(|t| (outputs[t], v.rows(t * p, p).into_owned()))
        .collect();
    let adj = graph.reverse(&seeds);
    let mut out = DVector::zeros(tau * d);
    for t in 0..tau {
        out.rows_mut(t * d, d).copy_from(&adj[z[t]]);
    }
    out
}
