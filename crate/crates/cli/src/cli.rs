use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mslope::eval::PenaltyFamily;

#[derive(Debug, Parser)]
#[command(name = "mslope", version, about = "Penalized multinomial logistic regression: fits, simulations, rate sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a penalized model to a CSV dataset.
    Fit {
        /// Dataset CSV (header `y,x1,...,xd`, labels 1..=L).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Number of classes; defaults to the largest label.
        #[arg(long = "classes")]
        num_classes: Option<usize>,
        /// Scale every feature column to mean square 1 before fitting.
        #[arg(long)]
        standardize: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate one synthetic sample, fit it and report its risks.
    Simulate {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a seeded sweep over sample sizes, penalties and replicates.
    Scaling {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Monte-Carlo Rademacher complexity of a penalty ball.
    Rademacher {
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed (at most 2^63 - 1).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_family)]
    pub penalty: Option<PenaltyFamily>,
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long = "c-nuclear")]
    pub c_nuclear: Option<f64>,
    /// Global multiplier of all penalty weights.
    #[arg(long)]
    pub lambda_scale: Option<f64>,
}

fn parse_family(s: &str) -> Result<PenaltyFamily, String> {
    s.parse().map_err(|e: mslope::Error| e.to_string())
}
