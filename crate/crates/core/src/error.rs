use thiserror::Error;

/// Errors produced by the model, solvers and front end.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("malformed configuration at line {line}: {reason}")]
    Syntax { line: usize, reason: String },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("control signal has {got} samples but the grid has {expected} nodes")]
    GridMismatch { expected: usize, got: usize },

    #[error("integration diverged at t = {time}: {what}")]
    Diverged { time: f64, what: String },

    #[error("degenerate budget multiplier: lambda_b = {0:e}")]
    DegenerateMultiplier(f64),

    #[error("bisection bracket invalid: spend at lambda_b = {lambda:e} is {spend:e}, budget is {budget:e}")]
    InvalidBracket { lambda: f64, spend: f64, budget: f64 },

    #[error("bisection stalled after {iterations} iterations (|spend - B| = {gap:e}, bracket width = {width:e})")]
    BisectionStalled { iterations: usize, gap: f64, width: f64 },

    #[error("static control infeasible: required level {required} exceeds u_max = {u_max}")]
    StaticInfeasible { required: f64, u_max: f64 },

    #[error("budget {budget} exceeds the maximum spend c(u_max)*T = {max_spend}")]
    BudgetInfeasible { budget: f64, max_spend: f64 },

    #[error("oracle search too large: {0}")]
    OracleGuard(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than by a solver failing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Syntax { .. }
                | Error::UnknownKey(_)
                | Error::GridMismatch { .. }
                | Error::StaticInfeasible { .. }
                | Error::BudgetInfeasible { .. }
                | Error::OracleGuard(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
