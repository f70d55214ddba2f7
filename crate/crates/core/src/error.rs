use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical blow-up: {0}")]
    NonFinite(String),
    #[error("unstable linearization: spectral radius {0} >= 1")]
    UnstableLinearization(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("ill-conditioned problem: {0}")]
    IllConditioned(String),
    #[error("no admissible epsilon: {0}")]
    NoEpsilon(String),
    #[error("function is not radial: direction dependence {0:e}")]
    NonRadial(f64),
    #[error("certificate violated at {witness:?}: {detail}")]
    CertificateViolated { detail: String, witness: Vec<f64> },
    #[error("budget collapsed to zero: {0}")]
    BudgetCollapsed(String),
    #[error("no convergence within {0} iterations")]
    MaxIterations(usize),
    #[error("iteration diverged: |x| exceeded {0:e}")]
    Divergence(f64),
    #[error("resonance: {0}")]
    Resonance(String),
    #[error("controller synthesis failed: {0}")]
    Synthesis(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
