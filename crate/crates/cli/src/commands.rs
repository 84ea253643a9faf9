use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;
use synthforge::audit::{self, FidelityReport, PrivacyReport};
use synthforge::experiments::pipeline::StageTiming;
use synthforge::experiments::presets::Preset;
use synthforge::experiments::{run_pipeline, run_preset_trials, MetricTable, PRESET_NAMES};
use synthforge::hybrid::ResolvedAlpha;
use synthforge::plan::SynthesisPlan;
use synthforge::{HybridConfig, Stage1Sampler};

use crate::args::{AuditArgs, ExperimentArgs, SynthArgs};
use crate::config::{build_plan, ConfigFile, SEED_ENV};
use crate::error::{CliError, NumericContext, Result};
use crate::table::{self, format_f64, Ingested};

pub const SCHEMA_VERSION: u32 = 1;
const MARKET_ETA: f64 = 0.0001;

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PrivacyFile<'a> {
    pub schema_version: u32,
    pub columns: &'a [String],
    #[serde(flatten)]
    pub report: &'a PrivacyReport,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FidelityFile<'a> {
    pub schema_version: u32,
    pub columns: &'a [String],
    #[serde(flatten)]
    pub report: &'a FidelityReport,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

const TOOL: ToolInfo = ToolInfo {
    name: "synthforge",
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
    pub input_columns: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_column: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OutputPaths {
    pub data: String,
    pub privacy: String,
    pub fidelity: String,
    pub manifest: String,
}

/// Everything except `timing` is a pure function of the input bytes and the
/// plan.
#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub command: &'static str,
    pub plan: SynthesisPlan,
    pub input: InputInfo,
    pub resolved_alpha: ResolvedAlpha,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidths: Option<Vec<f64>>,
    pub outputs: OutputPaths,
    pub timing: Timing,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Timing {
    pub wall_clock_seconds: f64,
    pub stages: Vec<StageTiming>,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn default_synth_prefix(input: &Path) -> PathBuf {
    with_suffix(&input.with_extension(""), ".synth")
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

/// Applies `--threads` (or the config value) to the global worker pool.
pub fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::usage("config", "--threads must be at least 1"));
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::debug!("thread pool already configured: {e}");
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = ConfigFile::load_optional(args.plan.config.as_deref())?;
    configure_threads(args.plan.threads.or(cfg.threads))?;
    let plan = build_plan(&args.plan, &cfg, env_seed().as_deref())?;
    let inputs = args.inputs.clone().or_else(|| cfg.inputs.clone());
    let response = args.response.clone().or_else(|| cfg.response.clone());
    let data = table::ingest(&args.input, inputs.as_deref(), response.as_deref(), true)?;
    info!(
        "read {} rows x {} inputs from {}",
        data.dataset.n_rows(),
        data.dataset.n_cols(),
        args.input.display()
    );

    let out = run_pipeline(&data.dataset, &plan).numeric("synthesis")?;

    let prefix = args.out.clone().unwrap_or_else(|| default_synth_prefix(&args.input));
    let paths = OutputPaths {
        data: with_suffix(&prefix, ".csv").display().to_string(),
        privacy: with_suffix(&prefix, ".privacy.json").display().to_string(),
        fidelity: with_suffix(&prefix, ".fidelity.json").display().to_string(),
        manifest: with_suffix(&prefix, ".manifest.json").display().to_string(),
    };
    let columns = data.input_names();
    table::write_like(Path::new(&paths.data), &data, &out.synthetic)?;
    table::write_json(
        Path::new(&paths.privacy),
        &PrivacyFile {
            schema_version: SCHEMA_VERSION,
            columns: &columns,
            report: &out.privacy,
        },
    )?;
    table::write_json(
        Path::new(&paths.fidelity),
        &FidelityFile {
            schema_version: SCHEMA_VERSION,
            columns: &columns,
            report: &out.fidelity,
        },
    )?;
    println!(
        "alpha={} lambda={} lid={}% meanTv={}",
        format_f64(out.alpha.alpha),
        format_f64(out.lambda),
        format_f64(out.privacy.lid_percent),
        format_f64(out.fidelity.mean_tv_norm)
    );
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: TOOL,
        command: "synth",
        plan,
        input: input_info(&args.input, &data),
        resolved_alpha: out.alpha,
        lambda: out.lambda,
        bandwidths: out.bandwidths,
        outputs: paths,
        timing: Timing {
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            stages: out.timings,
        },
    };
    table::write_json(Path::new(&manifest.outputs.manifest), &manifest)
}

fn input_info(path: &Path, data: &Ingested) -> InputInfo {
    InputInfo {
        path: path.display().to_string(),
        sha256: data.digest.clone(),
        rows: data.dataset.n_rows(),
        input_columns: data.input_names(),
        response_column: data.response_name().map(str::to_owned),
    }
}

pub fn audit(args: &AuditArgs) -> Result<()> {
    let original = table::ingest(&args.original, args.inputs.as_deref(), None, false)?;
    let columns = original.input_names();
    // The synthetic file is matched by column name.
    let synthetic = table::ingest(&args.synthetic, Some(&columns), None, false).map_err(|e| match e {
        CliError::Usage { message, .. } => {
            CliError::usage("audit", format!("schemas differ: {message}"))
        }
        other => other,
    })?;
    let (n, m) = (original.dataset.n_rows(), synthetic.dataset.n_rows());
    if n != m {
        return Err(CliError::usage(
            "audit",
            format!("row counts differ ({n} vs {m}); LID compares records row by row"),
        ));
    }
    let (x, s) = (original.dataset.inputs(), synthetic.dataset.inputs());
    let privacy = audit::compute_lid(x, s, args.eta).map_err(|e| CliError::usage("audit", e.to_string()))?;
    if args.bins < 2 {
        return Err(CliError::usage("audit", "--bins must be at least 2"));
    }
    let fidelity = audit::fidelity(x, s, args.bins).numeric("audit")?;
    table::write_json(
        &with_suffix(&args.out, ".privacy.json"),
        &PrivacyFile {
            schema_version: SCHEMA_VERSION,
            columns: &columns,
            report: &privacy,
        },
    )?;
    table::write_json(
        &with_suffix(&args.out, ".fidelity.json"),
        &FidelityFile {
            schema_version: SCHEMA_VERSION,
            columns: &columns,
            report: &fidelity,
        },
    )?;
    println!(
        "lid={}% meanTv={}",
        format_f64(privacy.lid_percent),
        format_f64(fidelity.mean_tv_norm)
    );
    Ok(())
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentFile<'a> {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub preset: &'a Preset,
    pub plan: &'a SynthesisPlan,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(flatten)]
    pub table: &'a MetricTable,
}

pub const METRIC_COLUMNS: [&str; 8] = ["preset", "setting", "alpha", "model", "metric", "mean", "std", "trials"];

pub fn experiment(args: &ExperimentArgs) -> Result<()> {
    let mut preset = Preset::by_name(&args.preset).ok_or_else(|| {
        CliError::usage(
            "experiment",
            format!("unknown preset '{}'; available: {}", args.preset, PRESET_NAMES.join(", ")),
        )
    })?;
    if args.plan.lid_budget.is_some() {
        return Err(CliError::usage("experiment", "--lid-budget is not supported; use --alphas"));
    }
    if args.trials < 1 {
        return Err(CliError::usage("experiment", "--trials must be at least 1"));
    }
    let cfg = ConfigFile::load_optional(args.plan.config.as_deref())?;
    configure_threads(args.plan.threads.or(cfg.threads))?;
    let mut plan = build_plan(&args.plan, &cfg, env_seed().as_deref())?;
    let market = matches!(preset, Preset::PriceSale(_) | Preset::MismatchPrice(_));
    if market && args.plan.eta.is_none() && cfg.eta.is_none() {
        plan.eta = MARKET_ETA;
    }
    // α comes from the preset sweep, not from the plan.
    plan.hybrid = HybridConfig::default();

    let alphas = args.alphas.clone().or_else(|| args.plan.alpha.map(|a| vec![a]));
    if let Some(a) = alphas {
        preset.set_alphas(&a).map_err(|e| CliError::usage("experiment", e.to_string()))?;
    }
    let sampler_flag = args.plan.sampler.or(cfg.sampler).is_some();
    match &mut preset {
        Preset::Nonlinear(e) => {
            e.delta_mse = args.delta_mse;
            if sampler_flag {
                e.samplers = vec![plan.stage1];
            }
        }
        _ if args.delta_mse => {
            return Err(CliError::usage("experiment", "--delta-mse only applies to the nonlinear preset"));
        }
        _ => {}
    }
    if !matches!(preset, Preset::Nonlinear(_)) && plan.stage1 != Stage1Sampler::Sh && sampler_flag {
        log::warn!("preset {} always uses the SH sampler", preset.name());
    }

    let table = run_preset_trials(&preset, &plan, args.trials, plan.seed).numeric("experiment")?;
    let prefix = args.out.clone().unwrap_or_else(|| PathBuf::from(preset.name()));
    let rows = table.rows.iter().map(|r| {
        vec![
            r.preset.clone(),
            r.setting.clone(),
            r.alpha.map(format_f64).unwrap_or_default(),
            r.model.clone(),
            r.metric.clone(),
            format_f64(r.mean),
            format_f64(r.std),
            r.trials.to_string(),
        ]
    });
    table::write_rows(&with_suffix(&prefix, ".csv"), &METRIC_COLUMNS, rows)?;
    table::write_json(
        &with_suffix(&prefix, ".json"),
        &ExperimentFile {
            schema_version: SCHEMA_VERSION,
            tool: TOOL,
            preset: &preset,
            plan: &plan,
            trials: args.trials,
            base_seed: plan.seed,
            table: &table,
        },
    )?;
    println!("{} rows written to {}", table.rows.len(), with_suffix(&prefix, ".csv").display());
    Ok(())
}
