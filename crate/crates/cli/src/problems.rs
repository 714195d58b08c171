//! Environments addressable by name.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use trajopt::envs::{pendulum_problem, random_lq_problem, two_link_arm_problem, PendulumParams, TwoLinkArmParams};
use trajopt::ControlProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Pendulum,
    TwoLinkArm,
    RandomLq,
}

/// State and control dimensions of the `random_lq` environment.
pub const RANDOM_LQ_DIMS: (usize, usize) = (4, 2);
pub const RANDOM_LQ_HORIZON: usize = 10;
pub const RANDOM_LQ_SPECTRAL_CAP: f64 = 0.95;

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Pendulum, EnvKind::TwoLinkArm, EnvKind::RandomLq];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pendulum => "pendulum",
            Self::TwoLinkArm => "two_link_arm",
            Self::RandomLq => "random_lq",
        }
    }

    /// Initial step size of the regularized solvers. The swing-up and arm
    /// objectives are flat in the controls, so unit steps barely move.
    pub fn default_gamma0(self) -> f64 {
        match self {
            Self::Pendulum | Self::TwoLinkArm => 1e3,
            Self::RandomLq => 1.0,
        }
    }

    /// Scale of the random commands drawn by the gradient check.
    pub fn command_scale(self) -> f64 {
        match self {
            Self::Pendulum => 2.0,
            Self::TwoLinkArm => 0.5,
            Self::RandomLq => 1.0,
        }
    }

    /// Build the problem; `tau` replaces the default number of steps.
    pub fn build(self, tau: Option<usize>, seed: u64) -> Result<ControlProblem> {
        let problem = match self {
            Self::Pendulum => {
                let params = tau.map_or_else(PendulumParams::default, PendulumParams::with_steps);
                pendulum_problem(&params)?
            }
            Self::TwoLinkArm => {
                let params = tau.map_or_else(TwoLinkArmParams::default, TwoLinkArmParams::with_steps);
                two_link_arm_problem(&params)?
            }
            Self::RandomLq => {
                let (d, p) = RANDOM_LQ_DIMS;
                random_lq_problem(tau.unwrap_or(RANDOM_LQ_HORIZON), d, p, seed, RANDOM_LQ_SPECTRAL_CAP)?
            }
        };
        Ok(problem)
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match Self::ALL.into_iter().find(|e| e.name() == s) {
            Some(env) => Ok(env),
            None => bail!("unknown environment '{s}' (expected one of pendulum, two_link_arm, random_lq)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for env in EnvKind::ALL {
            assert_eq!(env.name().parse::<EnvKind>().unwrap(), env);
        }
    }

    #[test]
    fn tau_sets_the_horizon() {
        assert_eq!(EnvKind::Pendulum.build(Some(40), 0).unwrap().horizon(), 40);
        assert_eq!(EnvKind::Pendulum.build(None, 0).unwrap().horizon(), 100);
        assert_eq!(EnvKind::RandomLq.build(Some(3), 1).unwrap().horizon(), 3);
    }
}
