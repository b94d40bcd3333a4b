//! Synthetic ground truth, risk estimates and Monte-Carlo diagnostics.

mod experiment;
mod moments;
mod rademacher;
mod risk;
mod synthetic;

pub use experiment::{
    replicate_seed, scaling_experiment, AggregateRow, ExperimentOptions, ExperimentRow, ExperimentTable, PenaltyFamily,
    PenaltyRecipe, PlotRow,
};
pub(crate) use experiment::csv_error;
pub use moments::{second_moments, SecondMomentReport};
pub use rademacher::{rademacher_draw, rademacher_mc, McEstimate};
pub use risk::{
    default_margin_grid, estimate_bayes_risk, least_squares_slope, margin_gaps, margin_report, mean_and_se,
    risk_report, MarginReport, RiskReport,
};
pub use synthetic::{draw_labels, generate, streams, Covariance, FeatureLaw, FeatureSampler, Structure, SyntheticSpec};
