//! A typed higher-order probabilistic language whose programs can be
//! evaluated exactly (with hard conditionals) or smoothed (with sigmoid
//! blends of both branches), together with type systems that certify
//! when stochastic gradient descent on the smoothed objective is sound,
//! gradient estimators and an experiment harness.

pub mod autodiff;
pub mod compile;
pub mod estimate;
pub mod harness;
pub mod semantics;
pub mod syntax;
pub mod types;
