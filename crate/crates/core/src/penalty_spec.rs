use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonincreasing sequence of strictly positive weights `w_1 >= ... >= w_k > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("weight sequence is empty"));
        }
        if let Some(w) = values.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!(
                "weights must be finite and strictly positive, found {w}"
            )));
        }
        if let Some(j) = values.windows(2).position(|p| p[1] > p[0]) {
            return Err(Error::invalid(format!(
                "weights must be nonincreasing, but w[{}] = {} < w[{}] = {}",
                j + 1,
                values[j],
                j + 2,
                values[j + 1]
            )));
        }
        Ok(Weights(values))
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.0.windows(2).all(|p| p[0] == p[1])
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for Weights {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Weights::new(values)
    }
}

impl From<Weights> for Vec<f64> {
    fn from(w: Weights) -> Self {
        w.0
    }
}

/// Penalty family together with its weights.
///
/// Group Lasso and sparse group Lasso are the constant-weight cases of the
/// two Slope families; [`PenaltySpec::family`] reports them by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PenaltySpec {
    /// `sum_j lambda_j |B|_(j)` over the descending row l2 norms.
    GroupSlope { lambda: Weights },
    /// Group Slope plus `sum_j sum_l kappa_l |B|_j(l)` within each row.
    SparseGroupSlope { lambda: Weights, kappa: Weights },
    /// `lambda ||B||_*`.
    Nuclear { lambda: f64 },
}

impl PenaltySpec {
    pub fn group_slope(lambda: Vec<f64>) -> Result<Self> {
        Ok(PenaltySpec::GroupSlope {
            lambda: Weights::new(lambda)?,
        })
    }

    pub fn group_lasso(d: usize, lambda: f64) -> Result<Self> {
        Ok(PenaltySpec::GroupSlope {
            lambda: Weights::constant(d, lambda)?,
        })
    }

    pub fn sparse_group_slope(lambda: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        Ok(PenaltySpec::SparseGroupSlope {
            lambda: Weights::new(lambda)?,
            kappa: Weights::new(kappa)?,
        })
    }

    pub fn sparse_group_lasso(d: usize, num_classes: usize, lambda: f64, kappa: f64) -> Result<Self> {
        Ok(PenaltySpec::SparseGroupSlope {
            lambda: Weights::constant(d, lambda)?,
            kappa: Weights::constant(num_classes, kappa)?,
        })
    }

    pub fn nuclear(lambda: f64) -> Result<Self> {
        let spec = PenaltySpec::Nuclear { lambda };
        spec.validate()?;
        Ok(spec)
    }

    /// Re-checks the invariants; needed for values built by hand or deserialized.
    pub fn validate(&self) -> Result<()> {
        match self {
            PenaltySpec::GroupSlope { lambda } => Weights::new(lambda.0.clone()).map(|_| ()),
            PenaltySpec::SparseGroupSlope { lambda, kappa } => {
                Weights::new(lambda.0.clone())?;
                Weights::new(kappa.0.clone()).map(|_| ())
            }
            PenaltySpec::Nuclear { lambda } => {
                if lambda.is_finite() && *lambda > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "nuclear weight must be finite and positive, got {lambda}"
                    )))
                }
            }
        }
    }

    /// Checks the weight lengths against a `d x L` coefficient shape.
    pub fn check_shape(&self, d: usize, num_classes: usize) -> Result<()> {
        match self {
            PenaltySpec::GroupSlope { lambda } => Error::check_dim("lambda length", d, lambda.len()),
            PenaltySpec::SparseGroupSlope { lambda, kappa } => {
                Error::check_dim("lambda length", d, lambda.len())?;
                Error::check_dim("kappa length", num_classes, kappa.len())
            }
            PenaltySpec::Nuclear { .. } => Ok(()),
        }
    }

    /// Kebab-case family name; constant weights report the Lasso variants.
    pub fn family(&self) -> &'static str {
        match self {
            PenaltySpec::GroupSlope { lambda } if lambda.is_constant() => "group-lasso",
            PenaltySpec::GroupSlope { .. } => "group-slope",
            PenaltySpec::SparseGroupSlope { lambda, kappa }
                if lambda.is_constant() && kappa.is_constant() =>
            {
                "sparse-group-lasso"
            }
            PenaltySpec::SparseGroupSlope { .. } => "sparse-group-slope",
            PenaltySpec::Nuclear { .. } => "nuclear",
        }
    }

    /// Every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(match self {
            PenaltySpec::GroupSlope { lambda } => PenaltySpec::GroupSlope {
                lambda: lambda.scaled(factor)?,
            },
            PenaltySpec::SparseGroupSlope { lambda, kappa } => PenaltySpec::SparseGroupSlope {
                lambda: lambda.scaled(factor)?,
                kappa: kappa.scaled(factor)?,
            },
            PenaltySpec::Nuclear { lambda } => PenaltySpec::nuclear(lambda * factor)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_weights() {
        assert!(Weights::new(vec![1.0, 2.0]).is_err());
        assert!(Weights::new(vec![1.0, 0.0]).is_err());
        assert!(Weights::new(vec![1.0, -0.5]).is_err());
        assert!(Weights::new(vec![f64::NAN]).is_err());
        assert!(Weights::new(vec![]).is_err());
        assert!(Weights::new(vec![2.0, 2.0, 1.0]).is_ok());
        assert!(PenaltySpec::nuclear(0.0).is_err());
        assert!(PenaltySpec::sparse_group_slope(vec![1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn family_names() {
        assert_eq!(PenaltySpec::group_lasso(3, 0.1).unwrap().family(), "group-lasso");
        assert_eq!(
            PenaltySpec::group_slope(vec![0.2, 0.1]).unwrap().family(),
            "group-slope"
        );
        assert_eq!(
            PenaltySpec::sparse_group_lasso(3, 2, 0.1, 0.1).unwrap().family(),
            "sparse-group-lasso"
        );
        assert_eq!(PenaltySpec::nuclear(1.0).unwrap().family(), "nuclear");
    }

    #[test]
    fn deserialization_validates() {
        let ok = r#"{"family":"group-slope","lambda":[0.3,0.2]}"#;
        assert!(serde_json::from_str::<PenaltySpec>(ok).is_ok());
        let bad = r#"{"family":"group-slope","lambda":[0.2,0.3]}"#;
        assert!(serde_json::from_str::<PenaltySpec>(bad).is_err());
    }

    #[test]
    fn shape_checks() {
        let p = PenaltySpec::sparse_group_lasso(3, 2, 0.1, 0.1).unwrap();
        assert!(p.check_shape(3, 2).is_ok());
        assert!(p.check_shape(3, 4).is_err());
        assert!(p.check_shape(2, 2).is_err());
    }
}
