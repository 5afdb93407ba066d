use thiserror::Error;

use crate::equilibria::Assumption;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("assumption {assumption} violated (margin {margin:.6e})")]
    AssumptionViolated { assumption: Assumption, margin: f64 },

    #[error("economic quantities need the primitive parameters (a, c0, c)")]
    MissingPrimitives,

    #[error("polynomial has degree 0")]
    DegreeZero,

    #[error("eigenvalue iteration did not converge for a {0}x{0} matrix")]
    EigenFailure(usize),

    #[error("flip condition has a vanishing denominator for this delay parity")]
    DegenerateDenominator,

    #[error("critical adjustment speed {0} is not positive")]
    NonPositiveAlpha(f64),

    #[error("equilibrium is not stable at alpha = {alpha} (max modulus {modulus})")]
    NotStableAtStart { alpha: f64, modulus: f64 },

    #[error("no stability loss found for alpha in [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },

    #[error("orbit diverged at step {step}")]
    Divergent { step: usize },

    #[error("invalid sweep specification: {0}")]
    InvalidSpec(String),
}
