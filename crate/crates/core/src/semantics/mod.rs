//! Evaluation: measurable (hard conditionals), smoothed (sigmoid blends)
//! and an independent substitution-based operational semantics.

mod eval;
mod operational;
mod value;

use std::fmt;

use thiserror::Error;

use crate::syntax::SubstError;

pub use eval::{
    eval_compiled, eval_measurable, eval_real, eval_smoothed, eval_with, eval_with_fixed_transforms, guard_signature,
    Branching, EvalOptions,
};
pub use operational::{eval_operational, OperationalResult};
pub use value::{combine_safe, Closure, Combo, Value};

/// Accuracy coefficient of the smoothing; smaller is closer to the hard conditional.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingConfig {
    eta: f64,
}

impl SmoothingConfig {
    pub fn new(eta: f64) -> Result<SmoothingConfig, EvalError> {
        if eta.is_finite() && eta > 0.0 {
            Ok(SmoothingConfig { eta })
        } else {
            Err(EvalError::InvalidAccuracy(eta))
        }
    }

    pub fn eta(self) -> f64 {
        self.eta
    }
}

/// The logistic sigmoid with accuracy coefficient `eta`.
pub fn sigma_eta(x: f64, eta: f64) -> f64 {
    1.0 / (1.0 + (-x / eta).exp())
}

/// Numbers the evaluator can compute with: plain floats or dual numbers.
pub trait Scalar: Clone + fmt::Debug {
    fn constant(r: f64) -> Self;
    fn value(&self) -> f64;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn inv(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sigma(&self, eta: f64) -> Self;
    /// Whether the value is known not to depend on the parameters.
    fn is_constant(&self) -> bool {
        true
    }
}

impl Scalar for f64 {
    fn constant(r: f64) -> f64 {
        r
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, other: &f64) -> f64 {
        self + other
    }
    fn mul(&self, other: &f64) -> f64 {
        self * other
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn inv(&self) -> f64 {
        1.0 / self
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn sigma(&self, eta: f64) -> f64 {
        sigma_eta(*self, eta)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("trace length mismatch: the program needs more than {0} draws")]
    TraceExhausted(usize),
    #[error("trace length mismatch: the program used {used} of {len} draws")]
    TraceNotConsumed { used: usize, len: usize },
    #[error("expected {expected} parameter value(s), got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("parameter `{name}` must be positive, got {value}")]
    ParamDomain { name: String, value: f64 },
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("branch combination at unsafe type: a combined function drew samples")]
    UnsafeCombination,
    #[error("type mismatch in combination")]
    CombinationMismatch,
    #[error("runtime type error: {0}")]
    Type(String),
    #[error("sigma node requires an accuracy coefficient")]
    MissingAccuracy,
    #[error("invalid accuracy coefficient {0}; it must be positive and finite")]
    InvalidAccuracy(f64),
    #[error("transform is not affine in a score-supported distribution")]
    NotAffine,
    #[error("a guard depends on the parameters other than through a transform")]
    ParameterGuard,
    #[error(transparent)]
    Subst(#[from] SubstError),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_reference_values() {
        assert!((sigma_eta(1.0, 0.1) - 0.999_954_6).abs() < 1e-7);
        assert!((sigma_eta(-0.2, 0.2) - 0.268_941_4).abs() < 1e-7);
        assert_eq!(sigma_eta(0.0, 0.3), 0.5);
        assert_eq!(sigma_eta(-1e6, 0.01), 0.0);
    }

    #[test]
    fn accuracy_must_be_positive() {
        assert!(SmoothingConfig::new(0.0).is_err());
        assert!(SmoothingConfig::new(f64::NAN).is_err());
        assert_eq!(SmoothingConfig::new(0.2).unwrap().eta(), 0.2);
    }
}
