use thiserror::Error;

use crate::params::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid saddle parameters: {}", join_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("DegenerateDelta: |delta| = {delta:e} is below {threshold:e}")]
    DegenerateDelta { delta: f64, threshold: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integrator exceeded {max_steps} steps at t = {t}")]
    StepLimitExceeded { max_steps: usize, t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("trajectory left the bounding box at t = {t} (state = ({x}, {y}))")]
    LeftDomain { t: f64, x: f64, y: f64 },

    #[error("orbit left the domain before reaching the diagonal")]
    DiagonalNotReached,

    #[error("root not bracketed: f({lo}) = {f_lo:e}, f({hi}) = {f_hi:e}")]
    BracketFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root finder did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("improper integral diverges: {0}")]
    NonIntegrable(String),

    #[error("quadrature did not reach tolerance: estimate {value:e}, error {error:e}")]
    QuadratureFailure { value: f64, error: f64 },

    #[error("Monte Carlo estimation requires an explicit seed")]
    SeedRequired,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("input sequence is not non-increasing at index {index}")]
    NonMonotoneInput { index: usize },

    #[error("beta = {0} is outside the admissible range")]
    BetaOutOfRange(f64),

    #[error("least-squares system is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}
