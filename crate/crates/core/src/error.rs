use thiserror::Error;

/// Errors raised by problem evaluation, oracles, steps and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A rolled-out state contained NaN or infinity.
    #[error("trajectory diverged: non-finite state at t = {t}")]
    Diverged { t: usize },

    #[error("dynamics do not provide {0}")]
    MissingCapability(&'static str),

    /// `W_uu` failed its Cholesky factorization in a backward pass.
    #[error("ill-conditioned subproblem: W_uu is not positive definite at t = {t}")]
    IllConditioned { t: usize },

    /// The DDP jitter loop ran past its cap without making `W_uu` positive definite.
    #[error("indefinite model at t = {t}: regularization exceeded {lambda:e}")]
    IndefiniteModel { t: usize, lambda: f64 },

    #[error("no decrease of the objective after {trials} step-size trials")]
    NoDecrease { trials: usize },

    #[error("line search failed: step size fell below {min_step:e}")]
    LineSearchFailed { min_step: f64 },

    #[error("unsupported problem structure: {0}")]
    UnsupportedStructure(&'static str),

    #[error("problem is deterministic (noise dimension 0)")]
    Deterministic,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
