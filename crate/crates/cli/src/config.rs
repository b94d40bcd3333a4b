//! Run configurations read from TOML files and command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use mslope::eval::{Covariance, ExperimentOptions, FeatureLaw, PenaltyFamily, PenaltyRecipe, Structure, SyntheticSpec};
use mslope::penalties::WeightConfig;
use mslope::SolverConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cli::Overrides;
use crate::CliError;

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn one() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    0.05
}

fn default_law() -> FeatureLaw {
    FeatureLaw::Gaussian {
        covariance: Covariance::Identity,
    }
}

fn default_recipe() -> PenaltyRecipe {
    PenaltyRecipe::new(PenaltyFamily::GroupSlope, WeightConfig::default())
}

/// A synthetic design without its seed; the seed comes from the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Design {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub num_classes: usize,
    pub structure: Structure,
    #[serde(default = "one")]
    pub signal_scale: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_law")]
    pub feature_law: FeatureLaw,
}

impl Design {
    pub fn with_seed(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n: self.n,
            d: self.d,
            num_classes: self.num_classes,
            structure: self.structure.clone(),
            signal_scale: self.signal_scale,
            delta: self.delta,
            feature_law: self.feature_law.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Dataset CSV with header `y, x1, ..., xd` and labels `1..=L`.
    pub data: PathBuf,
    /// Number of classes; defaults to the largest label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_recipe")]
    pub penalty: PenaltyRecipe,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub design: Design,
    #[serde(default = "default_recipe")]
    pub penalty: PenaltyRecipe,
    #[serde(default)]
    pub experiment: ExperimentOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses one per available core. Does not affect outputs.
    #[serde(default)]
    pub threads: usize,
    pub replicates: usize,
    pub design: Design,
    /// Sample sizes replacing `design.n`, one grid point each; empty for the single point `design.n`.
    #[serde(default)]
    pub n_values: Vec<usize>,
    pub penalties: Vec<PenaltyRecipe>,
    #[serde(default)]
    pub experiment: ExperimentOptions,
}

impl ScalingConfig {
    pub fn grid(&self) -> Vec<SyntheticSpec> {
        let base = self.design.with_seed(self.seed);
        if self.n_values.is_empty() {
            return vec![base];
        }
        self.n_values
            .iter()
            .map(|&n| SyntheticSpec { n, ..base.clone() })
            .collect()
    }
}

/// Feature sample for a Rademacher estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDesign {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub num_classes: usize,
    #[serde(default = "default_law")]
    pub feature_law: FeatureLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RademacherConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub features: FeatureDesign,
    #[serde(default = "default_recipe")]
    pub penalty: PenaltyRecipe,
    pub num_draws: usize,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn write_resolved<T: Serialize>(config: &T, out_dir: &Path) -> Result<(), CliError> {
    let text = toml::to_string(config).map_err(|e| CliError::Other(format!("cannot serialize config: {e}")))?;
    fs::write(out_dir.join(RESOLVED_CONFIG), text)?;
    Ok(())
}

impl Overrides {
    fn apply_recipe(&self, recipe: &mut PenaltyRecipe) {
        if let Some(family) = self.penalty {
            if family != recipe.family {
                recipe.name = None;
            }
            recipe.family = family;
        }
        let w = &mut recipe.weights;
        for (slot, value) in [
            (&mut w.c0, self.c0),
            (&mut w.c1, self.c1),
            (&mut w.c2, self.c2),
            (&mut w.c_nuclear, self.c_nuclear),
        ] {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(s) = self.lambda_scale {
            recipe.lambda_scale = s;
        }
    }

    fn apply_common(&self, seed: &mut u64, out_dir: &mut PathBuf) {
        if let Some(s) = self.seed {
            *seed = s;
        }
        if let Some(dir) = &self.out_dir {
            out_dir.clone_from(dir);
        }
    }

    pub fn apply_fit(&self, cfg: &mut FitConfig) {
        self.apply_recipe(&mut cfg.penalty);
        if let Some(dir) = &self.out_dir {
            cfg.out_dir.clone_from(dir);
        }
    }

    pub fn apply_simulate(&self, cfg: &mut SimulateConfig) {
        self.apply_common(&mut cfg.seed, &mut cfg.out_dir);
        self.apply_recipe(&mut cfg.penalty);
    }

    /// `--penalty` replaces the whole penalty list by that single family.
    pub fn apply_scaling(&self, cfg: &mut ScalingConfig) {
        self.apply_common(&mut cfg.seed, &mut cfg.out_dir);
        if let Some(family) = self.penalty {
            let weights = cfg.penalties.first().map(|r| r.weights).unwrap_or_default();
            cfg.penalties = vec![PenaltyRecipe::new(family, weights)];
        }
        for recipe in &mut cfg.penalties {
            self.apply_recipe(recipe);
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
    }

    pub fn apply_rademacher(&self, cfg: &mut RademacherConfig) {
        self.apply_common(&mut cfg.seed, &mut cfg.out_dir);
        self.apply_recipe(&mut cfg.penalty);
    }
}
