//! Discrete-time nonlinear optimal control: trajectory oracles, linear-quadratic
//! dynamic programming, ILQR/ILQG/DDP steps and regularized Gauss-Newton solvers.

pub mod autodiff;
pub mod costs;
pub mod dynamics;
pub mod envs;
pub mod error;
pub mod fd;
pub mod lqr;
pub mod problem;
pub mod solvers;
pub mod steps;

pub use autodiff::{DerivativeOrder, ForwardTape, Oracle, OracleCounter};
pub use costs::QuadraticCost;
pub use dynamics::{FdMode, FiniteDifference, LinearDynamics};
pub use error::{Error, Result};
pub use lqr::{lq_backward, lq_rollout, lq_solve, lqg_backward, CostToGo, FeedbackPolicy, LqSubproblem};
pub use problem::{Command, ControlProblem, CostFunction, Dynamics, NoiseSequence, Trajectory};
