use thiserror::Error;

use crate::exprdsl::ExprError;

/// Failure modes of the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error("invalid input: {0}")]
    Precondition(String),
    #[error("growth condition violated: {0}")]
    GrowthViolated(String),
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("bracket failure: {0}")]
    BracketFailure(String),
    #[error("iteration limit reached: {0}")]
    IterationLimit(String),
    #[error("non-positive sample at r = {r}, s = {s}: value {value}")]
    NonPositiveSample { r: f64, s: f64, value: f64 },
    #[error("divergent side in integral identity: {0}")]
    DivergentSide(String),
    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),
    #[error("operation requires a full polar solution")]
    WrongMode,
    #[error("range mismatch: {0}")]
    RangeMismatch(String),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input
    /// or a violated hypothesis.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureFailure(_)
                | Error::StepUnderflow { .. }
                | Error::NoConvergence(_)
                | Error::BracketFailure(_)
                | Error::IterationLimit(_)
                | Error::NewtonDivergence(_)
                | Error::DivergentSide(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(msg()))
    }
}
