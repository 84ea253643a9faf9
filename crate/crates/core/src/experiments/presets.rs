//! Named experiment presets and their per-trial procedures.

use serde::{Deserialize, Serialize};

use super::metrics::{self, delta_mse, estimate_elasticity, mse};
use super::pipeline::{fit_response_model, stage1, synthesize_at, Stage1Output};
use super::scenarios::{
    gen_nonlinear, gen_nonlinear_test, gen_price_sale, gen_price_sale_with_price_noise, MarketScenario,
    NonlinearScenario,
};
use super::trials::{run_trials, MetricRow, MetricTable};
use crate::audit;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lhs::Stage1Sampler;
use crate::plan::SynthesisPlan;
use crate::regression;
use crate::rng::{derive_seed, Stream};

pub const PRESET_NAMES: [&str; 4] = ["nonlinear", "price-sale", "mismatch-nonlinear", "mismatch-price"];
pub const DEFAULT_ALPHAS: [f64; 5] = [0.0, 0.2, 0.5, 0.8, 1.0];

/// Model used by the data user downstream of the synthetic release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PublicModel {
    Krr,
    Nwk,
}

impl PublicModel {
    pub fn name(&self) -> &'static str {
        match self {
            PublicModel::Krr => "krr",
            PublicModel::Nwk => "nwk",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct NonlinearExperiment {
    pub scenario: NonlinearScenario,
    pub alphas: Vec<f64>,
    pub samplers: Vec<Stage1Sampler>,
    pub models: Vec<PublicModel>,
    /// Also train on public and public-plus-synthetic data (slow: the
    /// combined KRR fit has twice the rows).
    pub delta_mse: bool,
}

impl Default for NonlinearExperiment {
    fn default() -> Self {
        Self {
            scenario: NonlinearScenario::default(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            samplers: vec![Stage1Sampler::Sh, Stage1Sampler::Random],
            models: vec![PublicModel::Krr, PublicModel::Nwk],
            delta_mse: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PriceSaleExperiment {
    pub scenario: MarketScenario,
    pub alphas: Vec<f64>,
}

impl Default for PriceSaleExperiment {
    fn default() -> Self {
        Self {
            scenario: MarketScenario::default(),
            alphas: vec![0.2, 0.5, 0.8, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct MismatchNonlinearExperiment {
    pub scenario: NonlinearScenario,
    pub alpha: f64,
    pub means: Vec<f64>,
}

impl Default for MismatchNonlinearExperiment {
    fn default() -> Self {
        Self {
            scenario: NonlinearScenario::default(),
            alpha: 0.5,
            means: (1..=10).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct MismatchPriceExperiment {
    pub scenario: MarketScenario,
    pub alpha: f64,
    /// Standard deviations of the noise added to the test log prices.
    pub sigmas: Vec<f64>,
    /// Customers in the public data set (52 weeks each, per brand).
    pub public_customers: usize,
}

impl Default for MismatchPriceExperiment {
    fn default() -> Self {
        Self {
            scenario: MarketScenario::default(),
            alpha: 0.5,
            sigmas: (1..=10).map(|k| k as f64 * 0.2).collect(),
            public_customers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Preset {
    Nonlinear(NonlinearExperiment),
    PriceSale(PriceSaleExperiment),
    MismatchNonlinear(MismatchNonlinearExperiment),
    MismatchPrice(MismatchPriceExperiment),
}

impl Preset {
    pub fn by_name(name: &str) -> Option<Preset> {
        match name {
            "nonlinear" => Some(Preset::Nonlinear(NonlinearExperiment::default())),
            "price-sale" => Some(Preset::PriceSale(PriceSaleExperiment::default())),
            "mismatch-nonlinear" => Some(Preset::MismatchNonlinear(MismatchNonlinearExperiment::default())),
            "mismatch-price" => Some(Preset::MismatchPrice(MismatchPriceExperiment::default())),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Nonlinear(_) => "nonlinear",
            Preset::PriceSale(_) => "price-sale",
            Preset::MismatchNonlinear(_) => "mismatch-nonlinear",
            Preset::MismatchPrice(_) => "mismatch-price",
        }
    }

    /// Replaces the α sweep; the mismatch presets take the first value.
    pub fn set_alphas(&mut self, alphas: &[f64]) -> Result<()> {
        if alphas.is_empty() {
            return Err(Error::Empty("alpha list"));
        }
        if let Some(&bad) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::param("alpha", bad, "must lie in [0, 1]"));
        }
        match self {
            Preset::Nonlinear(e) => e.alphas = alphas.to_vec(),
            Preset::PriceSale(e) => e.alphas = alphas.to_vec(),
            Preset::MismatchNonlinear(e) => e.alpha = alphas[0],
            Preset::MismatchPrice(e) => e.alpha = alphas[0],
        }
        Ok(())
    }

    pub fn run_trial(&self, plan: &SynthesisPlan, seed: u64) -> Result<Vec<MetricRow>> {
        match self {
            Preset::Nonlinear(e) => nonlinear_trial(e, plan, seed),
            Preset::PriceSale(e) => price_sale_trial(e, plan, seed),
            Preset::MismatchNonlinear(e) => mismatch_nonlinear_trial(e, plan, seed),
            Preset::MismatchPrice(e) => mismatch_price_trial(e, plan, seed),
        }
    }
}

/// Runs `trials` trials of `preset` with seeds `base_seed + t`.
pub fn run_preset_trials(preset: &Preset, plan: &SynthesisPlan, trials: usize, base_seed: u64) -> Result<MetricTable> {
    plan.validate()?;
    run_trials(trials, base_seed, |seed| preset.run_trial(plan, seed))
}

fn trial_plan(plan: &SynthesisPlan, seed: u64) -> SynthesisPlan {
    SynthesisPlan {
        seed,
        ..plan.clone()
    }
}

/// Test MSE of `model` trained on `train`.
pub fn public_model_mse(
    model: PublicModel,
    train: &Dataset,
    test: &Dataset,
    plan: &SynthesisPlan,
    seed: u64,
) -> Result<f64> {
    let truth = test.require_response()?;
    let pred = match model {
        PublicModel::Krr => fit_response_model(train, &trial_plan(plan, seed))?.predict(test.inputs())?,
        PublicModel::Nwk => {
            let h = regression::select_nw_bandwidth(
                train,
                &regression::default_nw_bandwidth_grid(),
                plan.lambda_grid.folds,
                derive_seed(seed, Stream::PublicModel as u64),
            )?;
            regression::nadaraya_watson(train, h, test.inputs())?
        }
    };
    mse(&pred, truth)
}

pub fn nonlinear_trial(e: &NonlinearExperiment, plan: &SynthesisPlan, seed: u64) -> Result<Vec<MetricRow>> {
    const NAME: &str = "nonlinear";
    let scenario = NonlinearScenario {
        seed: derive_seed(seed, Stream::Scenario as u64),
        ..e.scenario.clone()
    };
    let data = gen_nonlinear(&scenario)?;
    let base = trial_plan(plan, seed);
    let response = fit_response_model(&data.train, &base)?;
    let model_seed = derive_seed(seed, Stream::PublicModel as u64);

    let public_only: Vec<f64> = if e.delta_mse {
        e.models
            .iter()
            .map(|&m| public_model_mse(m, &data.public, &data.test, &base, model_seed))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut rows = Vec::new();
    // At α = 1 the release does not depend on the sampler.
    let mut alpha_one: Option<Vec<(f64, Option<f64>)>> = None;
    for &sampler in &e.samplers {
        let setting = format!("sampler={}", sampler.name());
        let s1 = stage1(
            data.train.inputs(),
            &SynthesisPlan {
                stage1: sampler,
                ..base.clone()
            },
        )?;
        for &alpha in &e.alphas {
            let release = synthesize_at(&data.train, &s1, &response, alpha)?;
            let lid = audit::compute_lid(data.train.inputs(), release.inputs(), plan.eta)?;
            rows.push(MetricRow::new(NAME, &setting, Some(alpha), "release", "lid", lid.lid_percent));
            let fid = audit::fidelity(data.train.inputs(), release.inputs(), plan.bin_count)?;
            rows.push(MetricRow::new(NAME, &setting, Some(alpha), "release", "tv", fid.mean_tv_norm));

            let scores = match (&alpha_one, alpha == 1.0) {
                (Some(cached), true) => cached.clone(),
                _ => {
                    let s = model_scores(e, &data.public, &release, &data.test, &base, model_seed)?;
                    if alpha == 1.0 {
                        alpha_one = Some(s.clone());
                    }
                    s
                }
            };
            for (k, &model) in e.models.iter().enumerate() {
                let (mse_star, combined) = scores[k];
                rows.push(MetricRow::new(NAME, &setting, Some(alpha), model.name(), "mse", mse_star));
                if let Some(c) = combined {
                    rows.push(MetricRow::new(NAME, &setting, Some(alpha), model.name(), "mse_public", public_only[k]));
                    rows.push(MetricRow::new(NAME, &setting, Some(alpha), model.name(), "mse_combined", c));
                    rows.push(MetricRow::new(
                        NAME,
                        &setting,
                        Some(alpha),
                        model.name(),
                        "delta_mse",
                        delta_mse(public_only[k], c)?,
                    ));
                }
            }
        }
    }
    Ok(rows)
}

fn model_scores(
    e: &NonlinearExperiment,
    public: &Dataset,
    release: &Dataset,
    test: &Dataset,
    plan: &SynthesisPlan,
    seed: u64,
) -> Result<Vec<(f64, Option<f64>)>> {
    let combined = if e.delta_mse { Some(public.concat(release)?) } else { None };
    e.models
        .iter()
        .map(|&m| {
            let alone = public_model_mse(m, release, test, plan, seed)?;
            let with_public = match &combined {
                Some(c) => Some(public_model_mse(m, c, test, plan, seed)?),
                None => None,
            };
            Ok((alone, with_public))
        })
        .collect()
}

struct BrandSynthesis {
    data: Dataset,
    stage1: Stage1Output,
    response: super::pipeline::ResponseModel,
}

fn prepare_brands(
    scenario: &MarketScenario,
    plan: &SynthesisPlan,
    seed: u64,
) -> Result<(super::scenarios::PriceSaleData, Vec<BrandSynthesis>)> {
    let market = gen_price_sale(&MarketScenario {
        seed: derive_seed(seed, Stream::Scenario as u64),
        ..scenario.clone()
    })?;
    let brands = (0..scenario.brands())
        .map(|j| {
            let data = market.brand_dataset(j);
            let p = trial_plan(plan, derive_seed(seed, 1000 + j as u64));
            let stage1 = stage1(data.inputs(), &p)?;
            let response = fit_response_model(&data, &p)?;
            Ok(BrandSynthesis {
                data,
                stage1,
                response,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((market, brands))
}

fn push_marketing(
    rows: &mut Vec<MetricRow>,
    name: &str,
    alpha: Option<f64>,
    model: &str,
    betas: &[f64],
    estimates: &[f64],
) -> Result<()> {
    let m = metrics::marketing_metrics(betas, estimates)?;
    rows.push(MetricRow::new(name, "", alpha, model, "mapd", m.mapd_percent));
    for (j, (omu, opr)) in m.omu_percent.iter().zip(&m.opr_percent).enumerate() {
        if let Some(v) = omu {
            rows.push(MetricRow::new(name, "", alpha, model, format!("omu_brand{}", j + 1), *v));
        }
        if let Some(v) = opr {
            rows.push(MetricRow::new(name, "", alpha, model, format!("opr_brand{}", j + 1), *v));
        }
        rows.push(MetricRow::new(name, "", alpha, model, format!("beta_brand{}", j + 1), estimates[j]));
    }
    Ok(())
}

pub fn price_sale_trial(e: &PriceSaleExperiment, plan: &SynthesisPlan, seed: u64) -> Result<Vec<MetricRow>> {
    const NAME: &str = "price-sale";
    let betas = &e.scenario.brand_elasticities;
    let (_, brands) = prepare_brands(&e.scenario, plan, seed)?;
    let original: Vec<f64> = brands
        .iter()
        .map(|b| estimate_elasticity(&b.data))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    push_marketing(&mut rows, NAME, None, "original", betas, &original)?;

    for &alpha in &e.alphas {
        let mut estimates = Vec::with_capacity(brands.len());
        let (mut breached, mut total) = (0usize, 0usize);
        for b in &brands {
            let release = synthesize_at(&b.data, &b.stage1, &b.response, alpha)?;
            estimates.push(estimate_elasticity(&release)?);
            let lid = audit::compute_lid(b.data.inputs(), release.inputs(), plan.eta)?;
            breached += lid.breached_records;
            total += lid.records;
        }
        push_marketing(&mut rows, NAME, Some(alpha), "lk-2ss", betas, &estimates)?;
        rows.push(MetricRow::new(
            NAME,
            "",
            Some(alpha),
            "release",
            "lid",
            100.0 * breached as f64 / total as f64,
        ));
    }
    Ok(rows)
}

pub fn mismatch_nonlinear_trial(
    e: &MismatchNonlinearExperiment,
    plan: &SynthesisPlan,
    seed: u64,
) -> Result<Vec<MetricRow>> {
    const NAME: &str = "mismatch-nonlinear";
    let scenario = NonlinearScenario {
        seed: derive_seed(seed, Stream::Scenario as u64),
        mismatch_mean: None,
        ..e.scenario.clone()
    };
    let data = gen_nonlinear(&scenario)?;
    let base = trial_plan(plan, seed);
    let response = fit_response_model(&data.train, &base)?;
    let s1 = stage1(data.train.inputs(), &base)?;
    let release = synthesize_at(&data.train, &s1, &response, e.alpha)?;
    let model_seed = derive_seed(seed, Stream::PublicModel as u64);
    let public_model = fit_response_model(&data.public, &trial_plan(&base, model_seed))?;
    let combined_model = fit_response_model(&data.public.concat(&release)?, &trial_plan(&base, model_seed))?;

    let mut rows = Vec::new();
    for (k, &mu) in e.means.iter().enumerate() {
        let setting = format!("mu={mu}");
        let test = gen_nonlinear_test(&scenario, Some(mu), derive_seed(scenario.seed, 100 + k as u64))?;
        let truth = test.require_response()?;
        let mse_public = mse(&public_model.predict(test.inputs())?, truth)?;
        let mse_combined = mse(&combined_model.predict(test.inputs())?, truth)?;
        let tv = audit::fidelity(test.inputs(), release.inputs(), plan.bin_count)?.mean_tv_norm;
        let a = Some(e.alpha);
        rows.push(MetricRow::new(NAME, &setting, a, "krr", "mse_public", mse_public));
        rows.push(MetricRow::new(NAME, &setting, a, "krr", "mse_combined", mse_combined));
        rows.push(MetricRow::new(NAME, &setting, a, "krr", "delta_mse", delta_mse(mse_public, mse_combined)?));
        rows.push(MetricRow::new(NAME, &setting, a, "release", "tv", tv));
    }
    Ok(rows)
}

pub fn mismatch_price_trial(e: &MismatchPriceExperiment, plan: &SynthesisPlan, seed: u64) -> Result<Vec<MetricRow>> {
    const NAME: &str = "mismatch-price";
    let (_, brands) = prepare_brands(&e.scenario, plan, seed)?;
    let public = gen_price_sale(&MarketScenario {
        customers: e.public_customers,
        customer_effects: None,
        seed: derive_seed(seed, Stream::PublicModel as u64),
        ..e.scenario.clone()
    })?;
    let model_seed = derive_seed(seed, Stream::PublicModel as u64);
    let models = brands
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let release = synthesize_at(&b.data, &b.stage1, &b.response, e.alpha)?;
            let p = trial_plan(plan, model_seed);
            let public_j = public.brand_dataset(j);
            Ok((
                fit_response_model(&public_j, &p)?,
                fit_response_model(&public_j.concat(&release)?, &p)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (k, &sigma) in e.sigmas.iter().enumerate() {
        let test = gen_price_sale_with_price_noise(
            &MarketScenario {
                noise_parameter: 0.0,
                seed: derive_seed(seed, 200 + k as u64),
                ..e.scenario.clone()
            },
            sigma,
        )?;
        let (mut mse_public, mut mse_combined) = (0.0, 0.0);
        for (j, (public_model, combined_model)) in models.iter().enumerate() {
            let t = test.brand_dataset(j);
            let truth = t.require_response()?;
            mse_public += mse(&public_model.predict(t.inputs())?, truth)? / models.len() as f64;
            mse_combined += mse(&combined_model.predict(t.inputs())?, truth)? / models.len() as f64;
        }
        let setting = format!("sigma={sigma}");
        let a = Some(e.alpha);
        rows.push(MetricRow::new(NAME, &setting, a, "krr", "mse_public", mse_public));
        rows.push(MetricRow::new(NAME, &setting, a, "krr", "mse_combined", mse_combined));
        rows.push(MetricRow::new(NAME, &setting, a, "krr", "delta_mse", delta_mse(mse_public, mse_combined)?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_nonlinear() -> NonlinearExperiment {
        NonlinearExperiment {
            scenario: NonlinearScenario {
                train_size: 80,
                test_size: 30,
                public_size: 60,
                ..NonlinearScenario::default()
            },
            alphas: vec![0.0, 1.0],
            samplers: vec![Stage1Sampler::Sh, Stage1Sampler::Random],
            models: vec![PublicModel::Krr, PublicModel::Nwk],
            delta_mse: true,
        }
    }

    #[test]
    fn preset_names_resolve() {
        for name in PRESET_NAMES {
            assert_eq!(Preset::by_name(name).unwrap().name(), name);
        }
        assert!(Preset::by_name("bogus").is_none());
    }

    #[test]
    fn nonlinear_rows_cover_every_alpha_and_model() {
        let preset = Preset::Nonlinear(small_nonlinear());
        let table = run_preset_trials(&preset, &SynthesisPlan::default(), 2, 5).unwrap();
        for setting in ["sampler=sh", "sampler=random"] {
            for alpha in [0.0, 1.0] {
                for model in ["krr", "nwk"] {
                    for metric in ["mse", "mse_public", "mse_combined", "delta_mse"] {
                        assert!(table.find(setting, Some(alpha), model, metric).is_some());
                    }
                }
            }
        }
        // The α = 1 release is sampler independent.
        let a = table.find("sampler=sh", Some(1.0), "krr", "mse").unwrap().mean;
        let b = table.find("sampler=random", Some(1.0), "krr", "mse").unwrap().mean;
        assert_eq!(a, b);
        assert!(table.find("sampler=sh", Some(0.0), "krr", "mse").unwrap().std > 0.0);
    }

    #[test]
    fn noiseless_market_recovers_elasticities() {
        let e = PriceSaleExperiment {
            scenario: MarketScenario {
                noise_parameter: 0.0,
                customers: 1,
                weeks: 20,
                ..MarketScenario::default()
            },
            alphas: vec![1.0],
        };
        let rows = price_sale_trial(&e, &SynthesisPlan::default(), 1).unwrap();
        let get = |model: &str, metric: &str| {
            rows.iter().find(|r| r.model == model && r.metric == metric).unwrap().value
        };
        assert!(get("original", "mapd") < 1e-10);
        assert!((get("original", "opr_brand1") - 100.0).abs() < 1e-8);
        assert!((get("original", "omu_brand1") - 200.0).abs() < 1e-8);
    }

    #[test]
    fn alphas_are_validated() {
        let mut p = Preset::by_name("price-sale").unwrap();
        assert!(p.set_alphas(&[0.2, 1.2]).is_err());
        assert!(p.set_alphas(&[]).is_err());
        p.set_alphas(&[0.3]).unwrap();
    }
}
