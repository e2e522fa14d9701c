use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed mortality row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("mortality ages must be contiguous: expected {expected}, found {found}")]
    NonContiguousAges { expected: u32, found: u32 },

    #[error("survival probability {value} at age {age} is outside [0, 1]")]
    ProbabilityOutOfRange { age: u32, value: f64 },

    #[error("age {age} is not covered by the annuity source")]
    AgeOutOfTable { age: u32 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("final target {target} is not positive; the pension gap is already closed")]
    NonPositiveGap { target: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error(
        "closed-form {coefficient} disagrees with the ODE integration at t = {t}: {closed} vs {oracle}"
    )]
    ClosedFormMismatch { coefficient: &'static str, t: f64, closed: f64, oracle: f64 },

    #[error("closed-form coefficients are degenerate ({reason}); use the numerical ODE mode")]
    DegenerateClosedForm { reason: &'static str },

    #[error("investment fraction is undefined at zero wealth")]
    ZeroWealth,

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("sample set is empty")]
    EmptySamples,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
