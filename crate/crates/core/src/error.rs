//! Error and defect-valuation types shared across the crate.

use num::rational::Ratio;
use std::fmt;

pub type Rat = Ratio<i64>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("outside convergence domain: {0}")]
    ConvergenceDomain(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported root-of-unity order {order} (tower supports divisors of {supported})")]
    UnsupportedOrder { order: u64, supported: u64 },
    #[error("level {level} too low: {reason}")]
    InsufficientLevel { level: u32, reason: String },
    #[error("precision exhausted: {0}")]
    PrecisionLoss(String),
    #[error("verification failure: {0}")]
    VerificationFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Outcome of comparing two quantities p-adically.
///
/// `AtLeast(k)` means the difference is zero to the available precision,
/// which only guarantees valuation >= k. `Exact(k)` means the difference
/// is a genuine nonzero quantity of valuation exactly k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Defect {
    ExactZero,
    AtLeast(Rat),
    Exact(Rat),
}

impl Defect {
    /// Whether the defect valuation is known to be >= `threshold`.
    pub fn meets(&self, threshold: Rat) -> bool {
        match self {
            Defect::ExactZero => true,
            Defect::AtLeast(k) | Defect::Exact(k) => *k >= threshold,
        }
    }

    /// Lower bound on the defect valuation, if finite knowledge exists.
    /// `None` for an exact zero (infinite valuation).
    pub fn bound(&self) -> Option<Rat> {
        match self {
            Defect::ExactZero => None,
            Defect::AtLeast(k) | Defect::Exact(k) => Some(*k),
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self, Defect::ExactZero)
    }
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::ExactZero => write!(f, "0 (exact)"),
            Defect::AtLeast(k) => write!(f, ">={}", k),
            Defect::Exact(k) => write!(f, "{}", k),
        }
    }
}
