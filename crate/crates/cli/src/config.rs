//! TOML configuration and its merge with command-line flags.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use synthforge::plan::SynthesisPlan;
use synthforge::{CvGrid, HybridConfig, Kernel, Scaling, Stage1Sampler};

use crate::args::{KernelArg, PlanArgs, SamplerArg, ScalingArg};
use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "SYNTHFORGE_SEED";
pub const DEFAULT_GAUSSIAN_WIDTH: f64 = 0.25;
const STAGE: &str = "config";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub eta: Option<f64>,
    pub sampler: Option<SamplerArg>,
    pub scaling: Option<ScalingArg>,
    pub threads: Option<usize>,
    pub inputs: Option<Vec<String>>,
    pub response: Option<String>,
    #[serde(default)]
    pub hybrid: HybridSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub regression: RegressionSection,
    #[serde(default)]
    pub marginals: MarginalsSection,
    #[serde(default)]
    pub audit: AuditSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct HybridSection {
    pub alpha: Option<f64>,
    pub lid_budget: Option<f64>,
    pub range_width: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct KernelSection {
    pub kind: Option<KernelArg>,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RegressionSection {
    pub lambda_grid: Option<Vec<f64>>,
    pub folds: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MarginalsSection {
    pub bandwidth_grid: Option<Vec<f64>>,
    pub folds: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AuditSection {
    pub bins: Option<usize>,
    pub assume_uniform: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(STAGE, path, e))?;
        Self::parse(&text).map_err(|m| CliError::usage(STAGE, format!("{}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| e.to_string())?;
        if cfg.hybrid.alpha.is_some() && cfg.hybrid.lid_budget.is_some() {
            return Err("[hybrid] sets both alpha and lid-budget".into());
        }
        Ok(cfg)
    }

    pub fn load_optional(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

fn sampler(arg: SamplerArg) -> Stage1Sampler {
    match arg {
        SamplerArg::Sh => Stage1Sampler::Sh,
        SamplerArg::Random => Stage1Sampler::Random,
        SamplerArg::Weibull => Stage1Sampler::weibull(),
        SamplerArg::Cauchy => Stage1Sampler::cauchy(),
    }
}

/// Seed from the flag, the config file, `SYNTHFORGE_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>, env: Option<&str>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(STAGE, format!("{SEED_ENV}='{v}' is not a non-negative integer"))),
        None => Ok(0),
    }
}

/// Builds the plan with precedence flag > config file > default.
pub fn build_plan(flags: &PlanArgs, cfg: &ConfigFile, env_seed: Option<&str>) -> Result<SynthesisPlan> {
    let mut plan = SynthesisPlan {
        seed: resolve_seed(flags.seed, cfg.seed, env_seed)?,
        ..SynthesisPlan::default()
    };
    if let Some(s) = flags.sampler.or(cfg.sampler) {
        plan.stage1 = sampler(s);
    }
    if let Some(eta) = flags.eta.or(cfg.eta) {
        plan.eta = eta;
    }
    if let Some(s) = flags.scaling.or(cfg.scaling) {
        plan.scaling = match s {
            ScalingArg::None => Scaling::None,
            ScalingArg::Minmax => Scaling::MinMax,
        };
    }

    let range_width = flags.range_width.or(cfg.hybrid.range_width);
    plan.hybrid = match (flags.alpha, flags.lid_budget) {
        (Some(a), _) => HybridConfig::Alpha(a),
        (None, Some(b)) => HybridConfig::LidBudget {
            budget_percent: b,
            range_width,
        },
        (None, None) => match (cfg.hybrid.alpha, cfg.hybrid.lid_budget) {
            (Some(a), _) => HybridConfig::Alpha(a),
            (None, Some(b)) => HybridConfig::LidBudget {
                budget_percent: b,
                range_width,
            },
            (None, None) => plan.hybrid,
        },
    };
    if range_width.is_some() && !matches!(plan.hybrid, HybridConfig::LidBudget { .. }) {
        return Err(CliError::usage(STAGE, "--range-width only applies with --lid-budget"));
    }

    let width = flags.kernel_width.or(cfg.kernel.width);
    plan.kernel = match flags.kernel.or(cfg.kernel.kind) {
        Some(KernelArg::Gaussian) => Kernel::Gaussian {
            width: width.unwrap_or(DEFAULT_GAUSSIAN_WIDTH),
        },
        Some(KernelArg::Wendland) | None if width.is_some() => {
            return Err(CliError::usage(STAGE, "--kernel-width only applies to --kernel gaussian"));
        }
        _ => Kernel::Wendland,
    };

    let lambdas = flags.lambda_grid.clone().or_else(|| cfg.regression.lambda_grid.clone());
    let folds = cfg.regression.folds.unwrap_or(plan.lambda_grid.folds);
    plan.lambda_grid = CvGrid {
        lambda_values: lambdas.unwrap_or(plan.lambda_grid.lambda_values),
        folds,
    };
    if let Some(g) = flags.bandwidth_grid.clone().or_else(|| cfg.marginals.bandwidth_grid.clone()) {
        plan.bandwidth_grid = g;
    }
    if let Some(f) = cfg.marginals.folds {
        plan.bandwidth_folds = f;
    }
    if let Some(b) = flags.bins.or(cfg.audit.bins) {
        plan.bin_count = b;
    }
    plan.assume_uniform = flags.assume_uniform || cfg.audit.assume_uniform.unwrap_or(false);

    plan.validate().map_err(|e| CliError::usage("plan", e.to_string()))?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let cfg = ConfigFile::parse(
            r#"
            seed = 3
            eta = 0.01
            sampler = "random"
            scaling = "min-max"
            inputs = ["a", "b"]
            response = "y"
            [hybrid]
            lid-budget = 10
            range-width = 1.0
            [kernel]
            kind = "gaussian"
            width = 0.5
            [regression]
            lambda-grid = [0.0, 0.001]
            folds = 4
            [audit]
            bins = 20
            "#,
        )
        .unwrap();
        let plan = build_plan(&PlanArgs::default(), &cfg, None).unwrap();
        assert_eq!(plan.seed, 3);
        assert_eq!(plan.stage1, Stage1Sampler::Random);
        assert_eq!(plan.scaling, Scaling::MinMax);
        assert_eq!(
            plan.hybrid,
            HybridConfig::LidBudget {
                budget_percent: 10.0,
                range_width: Some(1.0)
            }
        );
        assert_eq!(plan.kernel, Kernel::Gaussian { width: 0.5 });
        assert_eq!(plan.lambda_grid.folds, 4);
        assert_eq!(plan.bin_count, 20);
    }

    #[test]
    fn rejects_unknown_keys_and_conflicts() {
        assert!(ConfigFile::parse("sead = 3").is_err());
        assert!(ConfigFile::parse("[hybrid]\nalpha = 0.5\nlid-budget = 10").is_err());
    }

    #[test]
    fn flags_override_each_config_key() {
        let cfg = ConfigFile::parse(
            "seed = 1\neta = 0.01\nsampler = \"random\"\nscaling = \"none\"\n\
             [hybrid]\nalpha = 0.3\n[kernel]\nkind = \"wendland\"\n\
             [regression]\nlambda-grid = [0.1]\n[marginals]\nbandwidth-grid = [0.5]\n[audit]\nbins = 10\n",
        )
        .unwrap();
        let flags = PlanArgs {
            seed: Some(2),
            eta: Some(0.002),
            sampler: Some(SamplerArg::Sh),
            scaling: Some(ScalingArg::Minmax),
            alpha: Some(0.9),
            kernel: Some(KernelArg::Gaussian),
            lambda_grid: Some(vec![0.2]),
            bandwidth_grid: Some(vec![0.7]),
            bins: Some(30),
            ..PlanArgs::default()
        };
        let plan = build_plan(&flags, &cfg, Some("99")).unwrap();
        assert_eq!(plan.seed, 2);
        assert_eq!(plan.eta, 0.002);
        assert_eq!(plan.stage1, Stage1Sampler::Sh);
        assert_eq!(plan.scaling, Scaling::MinMax);
        assert_eq!(plan.hybrid, HybridConfig::Alpha(0.9));
        assert_eq!(plan.kernel, Kernel::Gaussian { width: DEFAULT_GAUSSIAN_WIDTH });
        assert_eq!(plan.lambda_grid.lambda_values, vec![0.2]);
        assert_eq!(plan.bandwidth_grid, vec![0.7]);
        assert_eq!(plan.bin_count, 30);
        // A budget flag also displaces a configured α.
        let flags = PlanArgs {
            lid_budget: Some(5.0),
            ..PlanArgs::default()
        };
        assert!(matches!(
            build_plan(&flags, &cfg, None).unwrap().hybrid,
            HybridConfig::LidBudget { .. }
        ));
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some("3")).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some(2), Some("3")).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, Some("3")).unwrap(), 3);
        assert_eq!(resolve_seed(None, None, None).unwrap(), 0);
        assert!(resolve_seed(None, None, Some("x")).is_err());
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let flags = PlanArgs {
            alpha: Some(1.5),
            ..PlanArgs::default()
        };
        let err = build_plan(&flags, &ConfigFile::default(), None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().starts_with("plan:"));
    }
}
