use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("rate equilibrium not certified: gap {gap:.3e} bit/s exceeds tolerance {tol:.3e} bit/s")]
    Certification { gap: f64, tol: f64 },

    #[error("best-response dynamics exceeded {rounds} rounds (last step {last_step:.3e} bit/s)")]
    BrDivergence { rounds: usize, last_step: f64 },

    #[error("agents terminated at different contention windows: {0:?}")]
    AgentDisagreement(Vec<u32>),
}
