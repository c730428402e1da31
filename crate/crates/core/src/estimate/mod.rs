//! Gradient estimators for `E[M](theta)` and the optimisers driven by them.

mod estimators;
mod model;
mod optim;
mod traces;

use thiserror::Error;

use crate::semantics::EvalError;
use crate::types::TypeError;

pub use estimators::{
    estimate, estimate_reparam, estimate_score, estimate_smooth, gradient_samples, objective_sample, single_sample,
    summarize, Estimator, EstimatorSample, GradientSummary,
};
pub use model::{Domain, Model, Sense, DEFAULT_REAL_BOUND, POSITIVE_FLOOR};
pub use optim::{run_adam, run_sgd, AdamConfig, GradientOracle, ModelOracle, StepSchedule, Trajectory};
pub use traces::TraceStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("model is ill-typed: {0}")]
    Type(#[from] TypeError),
    #[error("model body must have a real base type, found {0}")]
    NotRealValued(String),
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: u64 },
    #[error("score estimator unsupported: {0}")]
    ScoreUnsupported(String),
    #[error("optimiser diverged at iteration {iteration}")]
    Diverged { iteration: u64 },
    #[error("at least one Monte Carlo sample is required")]
    NoSamples,
    #[error("parameter vector has {got} entries, the model has {expected}")]
    Dimension { expected: usize, got: usize },
}
