//! Penalized maximum-likelihood solvers.

mod exhaustive;
mod fista;

pub use exhaustive::{
    complexity_penalty, enumerate_supports, fit_exhaustive_complexity, ExhaustiveResult,
    MAX_EXHAUSTIVE_FEATURES,
};
pub use fista::{
    fit, fixed_point_residual, gram_spectral_estimate, objective, objective_slack, FitResult, SolverConfig,
    StepSize, OBJECTIVE_SLACK_ULPS, POWER_ITERATIONS,
};
