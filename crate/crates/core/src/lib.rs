//! Sparse multiclass linear classifiers fitted by penalized maximum likelihood
//! in multinomial logistic regression.
//!
//! * [`model`]: class probabilities, likelihood, gradient, prediction, KL divergence.
//! * [`penalties`]: group Slope, sparse group Slope and nuclear norms with their
//!   proximal operators, dual norms and weight sequences.
//! * [`solver`]: FISTA with backtracking, and an exhaustive search for the
//!   complexity-penalized estimator on tiny problems.
//! * [`eval`]: synthetic data with known truth, risk estimation, Rademacher
//!   complexity and rate sweeps.

pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod model;
pub mod penalties;
pub mod penalty_spec;
pub mod rng;
pub mod solver;

pub use data::{center_rows, CoefficientMatrix, Dataset};
pub use error::{Error, Result};
pub use penalty_spec::{PenaltySpec, Weights};
pub use rng::{rng_stream, RngStream};
pub use solver::{fit, FitResult, SolverConfig};
