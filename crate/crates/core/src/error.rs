use alloc::string::String;

/// Errors raised by the engine. Protocol aborts are results, not errors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(&'static str),
    #[error("budget: {0}")]
    Budget(&'static str),
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: &'static str, reason: &'static str },
    #[error("empty frame")]
    EmptyFrame,
    #[error("calibration: {0}")]
    Calibration(&'static str),
    #[error("energy-test condition violated: l_T/k_T = {ratio:e} is not below w/r = {bound:e}")]
    TheoremCondition { ratio: f64, bound: f64 },
    #[error("infeasible: {0}")]
    Infeasible(&'static str),
    #[error("estimation: {0}")]
    Estimation(&'static str),
    #[error("configuration: {0}")]
    Configuration(String),
    #[error("construction: {0}")]
    Construction(String),
    #[error("domain: {0}")]
    Domain(&'static str),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
