//! Built-in models, the quadrature oracle and the experiment protocol.

mod builtins;
mod experiment;
mod quadrature;

pub use builtins::{builtin, BuiltinError, BuiltinModel, BUILTIN_NAMES};
pub use experiment::{
    elbo_experiment, iterations_within, objective_at, sig17, variance_at, variance_report, work_normalised_variance,
    write_elbo_csv, write_trajectory_csv, write_variance_csv, write_wnv_csv, Checkpoint, ExperimentConfig, RunResult,
    VarianceRow, WnvRow,
};
pub use quadrature::{
    bisect, integrate, integrate_1d, program_integrand, quadrature_abs_expectation, quadrature_expectation,
    quadrature_gradient, Piece, QuadratureError, QuadratureOptions, QuadratureResult,
};
