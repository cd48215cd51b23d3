use blowup_core::Error as CoreError;
use thiserror::Error;

/// CLI failure, one variant per documented exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("condition violated: {0}")]
    Violated(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Violated(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Expr(_)
            | CoreError::Precondition(_)
            | CoreError::RangeMismatch(_)
            | CoreError::WrongMode => CliError::Config(msg),
            CoreError::GrowthViolated(_) | CoreError::NonPositiveSample { .. } => {
                CliError::Violated(msg)
            }
            CoreError::Eval(_)
            | CoreError::QuadratureFailure(_)
            | CoreError::OutOfRange(_)
            | CoreError::StepUnderflow { .. }
            | CoreError::NoConvergence(_)
            | CoreError::BracketFailure(_)
            | CoreError::IterationLimit(_)
            | CoreError::DivergentSide(_)
            | CoreError::NewtonDivergence(_) => CliError::Numerical(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_documented_codes() {
        let cases = [
            (CoreError::Precondition("x".into()), 2),
            (CoreError::GrowthViolated("x".into()), 3),
            (
                CoreError::NonPositiveSample {
                    r: 1.0,
                    s: 1.0,
                    value: 0.0,
                },
                3,
            ),
            (CoreError::NoConvergence("x".into()), 4),
            (CoreError::BracketFailure("x".into()), 4),
            (CoreError::QuadratureFailure("x".into()), 4),
        ];
        for (e, code) in cases {
            assert_eq!(CliError::from(e).exit_code(), code);
        }
    }
}
