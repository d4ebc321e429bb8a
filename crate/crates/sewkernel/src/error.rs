use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SewError {
    #[error("series did not converge within budget: {0}")]
    BudgetExhausted(String),
    #[error("point too close to a pole or zero: {0}")]
    PoleProximity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate characteristic: theta value {0:e} below tolerance")]
    DegenerateCharacteristic(f64),
    #[error("kernel undefined for the odd characteristic")]
    UndefinedKernel,
    #[error("coincident points: |x - y| = {0:e}")]
    Coincident(f64),
    #[error("coordinate outside annulus: {0}")]
    OutsideAnnulus(String),
    #[error("quadrature under-resolved: quad_M = {quad_m} but at least {needed} required")]
    UnderResolved { quad_m: usize, needed: usize },
    #[error("method error: {0}")]
    Method(String),
    #[error("linear solve failed")]
    SolveFailed,
    #[error("charge imbalance: sum of charges = {0}")]
    ChargeImbalance(String),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("branch ambiguity: {0}")]
    BranchAmbiguity(String),
    #[error("invalid input: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, SewError>;
