use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::HybridConfig;
use crate::lhs::Stage1Sampler;
use crate::marginals;
use crate::regression::{CvGrid, Kernel};

pub const DEFAULT_ETA: f64 = 0.001;

/// Input scaling applied before the kernel regression. Stage-1 synthesis and
/// mixing always work in raw units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    #[default]
    None,
    MinMax,
}

/// Full configuration of one synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SynthesisPlan {
    pub stage1: Stage1Sampler,
    pub hybrid: HybridConfig,
    /// Attack tolerance used for the LID audit and the budget solver.
    pub eta: f64,
    pub kernel: Kernel,
    pub lambda_grid: CvGrid,
    /// KDE bandwidths in units of each column's standard deviation.
    pub bandwidth_grid: Vec<f64>,
    pub bandwidth_folds: usize,
    pub seed: u64,
    pub scaling: Scaling,
    pub bin_count: usize,
    /// Report the closed-form LID bound even in fixed-α mode.
    pub assume_uniform: bool,
}

impl Default for SynthesisPlan {
    fn default() -> Self {
        Self {
            stage1: Stage1Sampler::Sh,
            hybrid: HybridConfig::default(),
            eta: DEFAULT_ETA,
            kernel: Kernel::Wendland,
            lambda_grid: CvGrid::default(),
            bandwidth_grid: marginals::default_bandwidth_grid(),
            bandwidth_folds: marginals::DEFAULT_FOLDS,
            seed: 0,
            scaling: Scaling::None,
            bin_count: crate::audit::DEFAULT_BIN_COUNT,
            assume_uniform: false,
        }
    }
}

impl SynthesisPlan {
    pub fn validate(&self) -> Result<()> {
        self.stage1.validate()?;
        self.hybrid.validate()?;
        self.kernel.validate()?;
        self.lambda_grid.validate()?;
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param("eta", self.eta, "must be positive"));
        }
        if self.bandwidth_grid.is_empty() {
            return Err(Error::Empty("bandwidth grid"));
        }
        if let Some(&bad) = self.bandwidth_grid.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::param("bandwidth", bad, "grid values must be positive"));
        }
        if self.bandwidth_folds < 2 {
            return Err(Error::param(
                "bandwidthFolds",
                self.bandwidth_folds as f64,
                "need at least two folds",
            ));
        }
        if self.bin_count < 2 {
            return Err(Error::param("binCount", self.bin_count as f64, "need at least two bins"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_is_valid_and_round_trips_through_json() {
        let plan = SynthesisPlan {
            hybrid: HybridConfig::LidBudget {
                budget_percent: 10.0,
                range_width: Some(1.0),
            },
            ..SynthesisPlan::default()
        };
        plan.validate().unwrap();
        let text = serde_json::to_string(&plan).unwrap();
        let back: SynthesisPlan = serde_json::from_str(&text).unwrap();
        assert_eq!(back, plan);
        let partial: SynthesisPlan = serde_json::from_str(r#"{"eta": 0.01}"#).unwrap();
        assert_eq!(partial.eta, 0.01);
        assert_eq!(partial.lambda_grid, CvGrid::default());
    }

    #[test]
    fn rejects_bad_values() {
        let plan = SynthesisPlan {
            eta: 0.0,
            ..SynthesisPlan::default()
        };
        assert!(plan.validate().is_err());
        let plan = SynthesisPlan {
            hybrid: HybridConfig::Alpha(1.5),
            ..SynthesisPlan::default()
        };
        assert!(plan.validate().is_err());
    }
}
