//! Data generators for the simulation presets.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::rng;

/// Regression target: `(1-r)^5 (1+5r) + r²/5` inside the unit ball, `r²/5`
/// outside, with `r = ‖x‖`.
pub fn nonlinear_g(r: f64) -> f64 {
    let outer = 0.2 * r * r;
    if r <= 1.0 {
        let t = 1.0 - r;
        t.powi(5) * (1.0 + 5.0 * r) + outer
    } else {
        outer
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub const MISMATCH_STD: f64 = 0.14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct NonlinearScenario {
    pub train_size: usize,
    pub test_size: usize,
    pub public_size: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// When set, the test third input is drawn from `N(mean, 0.14²)`.
    pub mismatch_mean: Option<f64>,
}

impl Default for NonlinearScenario {
    fn default() -> Self {
        Self {
            train_size: 1000,
            test_size: 200,
            public_size: 1000,
            noise_std: 0.1,
            seed: 0,
            mismatch_mean: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearData {
    pub train: Dataset,
    pub test: Dataset,
    pub public: Dataset,
}

fn names() -> (Vec<String>, Option<String>) {
    (vec!["x1".into(), "x2".into(), "x3".into()], Some("y".into()))
}

fn nonlinear_set<R: Rng>(
    rng: &mut R,
    n: usize,
    noise_std: f64,
    mismatch_mean: Option<f64>,
) -> Result<Dataset> {
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.random();
        let x2: f64 = rng.random();
        let x3 = match mismatch_mean {
            Some(mu) => mu + MISMATCH_STD * std_normal.sample(rng),
            None => x1 * x1 + x2 * x2 + std_normal.sample(rng),
        };
        let row = vec![x1, x2, x3];
        let noise = if noise_std > 0.0 {
            noise_std * std_normal.sample(rng)
        } else {
            0.0
        };
        y.push(nonlinear_g(norm(&row)) + noise);
        rows.push(row);
    }
    let (inputs, response) = names();
    Dataset::new(Matrix::from_rows(&rows)?, Some(y))?.with_names(inputs, response)
}

impl NonlinearScenario {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("trainSize", self.train_size),
            ("testSize", self.test_size),
            ("publicSize", self.public_size),
        ] {
            if v < 1 {
                return Err(Error::param(name, v as f64, "must be at least 1"));
            }
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::param("noiseStd", self.noise_std, "must be positive"));
        }
        Ok(())
    }
}

/// Train and public sets carry response noise; the test set is noise-free.
pub fn gen_nonlinear(s: &NonlinearScenario) -> Result<NonlinearData> {
    s.validate()?;
    let mut r = rng::rng(s.seed);
    let train = nonlinear_set(&mut r, s.train_size, s.noise_std, None)?;
    let public = nonlinear_set(&mut r, s.public_size, s.noise_std, None)?;
    let test = nonlinear_set(&mut r, s.test_size, 0.0, s.mismatch_mean)?;
    Ok(NonlinearData {
        train,
        test,
        public,
    })
}

/// A fresh noise-free test set, optionally with the mismatched third input.
pub fn gen_nonlinear_test(s: &NonlinearScenario, mismatch_mean: Option<f64>, seed: u64) -> Result<Dataset> {
    s.validate()?;
    nonlinear_set(&mut rng::rng(seed), s.test_size, 0.0, mismatch_mean)
}

/// Law of the prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriceModel {
    /// `ln P ~ U(low, high)`.
    LogUniform { low: f64, high: f64 },
    /// `P ~ U(low, high)`.
    Uniform { low: f64, high: f64 },
}

impl Default for PriceModel {
    fn default() -> Self {
        PriceModel::LogUniform { low: 3.0, high: 4.0 }
    }
}

impl PriceModel {
    fn validate(&self) -> Result<()> {
        let (low, high) = match *self {
            PriceModel::LogUniform { low, high } | PriceModel::Uniform { low, high } => (low, high),
        };
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::Invalid(format!("price range [{low}, {high}] is empty")));
        }
        if let PriceModel::Uniform { low, .. } = *self {
            if !(low > 0.0) {
                return Err(Error::param("price", low, "prices must be positive to take logs"));
            }
        }
        Ok(())
    }

    fn sample_log_price<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            PriceModel::LogUniform { low, high } => rng.random_range(low..high),
            PriceModel::Uniform { low, high } => rng.random_range(low..high).ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct MarketScenario {
    pub brand_elasticities: Vec<f64>,
    pub brand_intercepts: Vec<f64>,
    /// `δ[customer][brand]`; drawn from `N(0, 0.2²)` when absent.
    pub customer_effects: Option<Vec<Vec<f64>>>,
    pub weeks: usize,
    pub customers: usize,
    pub price_model: PriceModel,
    /// Variance of the log-sales noise.
    pub noise_parameter: f64,
    pub seed: u64,
}

pub const DEFAULT_ELASTICITIES: [f64; 5] = [-1.5, -1.7, -2.01, -1.98, -1.9];
const CUSTOMER_EFFECT_STD: f64 = 0.2;

impl Default for MarketScenario {
    fn default() -> Self {
        Self {
            brand_elasticities: DEFAULT_ELASTICITIES.to_vec(),
            brand_intercepts: vec![4.0; DEFAULT_ELASTICITIES.len()],
            customer_effects: None,
            weeks: 52,
            customers: 4,
            price_model: PriceModel::default(),
            noise_parameter: 0.5,
            seed: 0,
        }
    }
}

impl MarketScenario {
    pub fn brands(&self) -> usize {
        self.brand_elasticities.len()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.brands();
        if j == 0 {
            return Err(Error::Empty("no brands"));
        }
        if let Some(&b) = self.brand_elasticities.iter().find(|b| !(**b < -1.0)) {
            return Err(Error::param("beta", b, "elasticities must be below -1 for a finite mark-up"));
        }
        if self.brand_intercepts.len() != j {
            return Err(Error::ShapeMismatch {
                expected: (j, 1),
                found: (self.brand_intercepts.len(), 1),
            });
        }
        if let Some(effects) = &self.customer_effects {
            if effects.len() != self.customers || effects.iter().any(|r| r.len() != j) {
                return Err(Error::Invalid(format!(
                    "customer effects must be {} x {j}",
                    self.customers
                )));
            }
        }
        if self.weeks < 1 || self.customers < 1 {
            return Err(Error::Invalid("weeks and customers must be at least 1".into()));
        }
        if !(self.noise_parameter >= 0.0 && self.noise_parameter.is_finite()) {
            return Err(Error::param("noiseParameter", self.noise_parameter, "must be non-negative"));
        }
        self.price_model.validate()
    }
}

/// Rows ordered brand-major, then customer, then week.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSaleData {
    /// Input `ln P`, response `ln S - μ_j - δ_ij`.
    pub data: Dataset,
    pub brand: Vec<usize>,
    pub log_sales: Vec<f64>,
}

impl PriceSaleData {
    /// Rows of one brand as a stand-alone dataset.
    pub fn brand_dataset(&self, j: usize) -> Dataset {
        let idx: Vec<usize> = (0..self.brand.len()).filter(|&i| self.brand[i] == j).collect();
        self.data.select_rows(&idx)
    }
}

pub fn gen_price_sale(s: &MarketScenario) -> Result<PriceSaleData> {
    gen_price_sale_with_price_noise(s, 0.0)
}

/// As [`gen_price_sale`], with `N(0, σ²)` noise added to each log price after
/// the sales were generated; used for mismatched test sets.
pub fn gen_price_sale_with_price_noise(s: &MarketScenario, price_noise_std: f64) -> Result<PriceSaleData> {
    s.validate()?;
    let mut r = rng::rng(s.seed);
    let effects = match &s.customer_effects {
        Some(e) => e.clone(),
        None => {
            let d = Normal::new(0.0, CUSTOMER_EFFECT_STD).expect("valid normal");
            (0..s.customers)
                .map(|_| (0..s.brands()).map(|_| d.sample(&mut r)).collect())
                .collect()
        }
    };
    let noise = Normal::new(0.0, s.noise_parameter.sqrt()).expect("valid normal");
    let shift = Normal::new(0.0, price_noise_std.max(0.0)).map_err(|e| Error::Invalid(e.to_string()))?;
    let total = s.brands() * s.customers * s.weeks;
    let (mut x, mut y, mut brand, mut log_sales) = (
        Vec::with_capacity(total),
        Vec::with_capacity(total),
        Vec::with_capacity(total),
        Vec::with_capacity(total),
    );
    for j in 0..s.brands() {
        let beta = s.brand_elasticities[j];
        for effect in &effects {
            for _ in 0..s.weeks {
                let lp = s.price_model.sample_log_price(&mut r);
                let eps = if s.noise_parameter > 0.0 { noise.sample(&mut r) } else { 0.0 };
                let adjusted = beta * lp + eps;
                log_sales.push(s.brand_intercepts[j] + effect[j] + adjusted);
                let observed = if price_noise_std > 0.0 { lp + shift.sample(&mut r) } else { lp };
                x.push(vec![observed]);
                y.push(adjusted);
                brand.push(j);
            }
        }
    }
    let data = Dataset::new(Matrix::from_rows(&x)?, Some(y))?
        .with_names(vec!["log_price".into()], Some("adjusted_log_sales".into()))?;
    Ok(PriceSaleData {
        data,
        brand,
        log_sales,
    })
}

/// `ln P` for raw prices, rejecting non-positive entries.
pub fn log_prices(prices: &[f64]) -> Result<Vec<f64>> {
    prices
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if p > 0.0 && p.is_finite() {
                Ok(p.ln())
            } else {
                Err(Error::Invalid(format!("price {p} at row {i} is not positive")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_values() {
        assert_eq!(nonlinear_g(0.0), 1.0);
        assert!((nonlinear_g(1.0) - 0.2).abs() < 1e-15);
        assert!((nonlinear_g(2.0) - 0.8).abs() < 1e-15);
        // Continuous across the boundary.
        assert!((nonlinear_g(1.0 - 1e-9) - nonlinear_g(1.0 + 1e-9)).abs() < 1e-8);
    }

    #[test]
    fn nonlinear_sets_have_declared_sizes_and_noise_free_test() {
        let s = NonlinearScenario {
            train_size: 50,
            test_size: 20,
            public_size: 30,
            ..NonlinearScenario::default()
        };
        let d = gen_nonlinear(&s).unwrap();
        assert_eq!(d.train.n_rows(), 50);
        assert_eq!(d.public.n_rows(), 30);
        assert_eq!(d.test.n_rows(), 20);
        for (row, y) in d.test.inputs().iter_rows().zip(d.test.response().unwrap()) {
            assert_eq!(nonlinear_g(norm(row)), *y);
        }
        let noisy = d
            .train
            .inputs()
            .iter_rows()
            .zip(d.train.response().unwrap())
            .filter(|(r, y)| nonlinear_g(norm(r)) != **y)
            .count();
        assert_eq!(noisy, 50);
        assert_eq!(gen_nonlinear(&s).unwrap(), d);
    }

    #[test]
    fn mismatched_test_third_input() {
        let s = NonlinearScenario {
            test_size: 4000,
            ..NonlinearScenario::default()
        };
        let t = gen_nonlinear_test(&s, Some(0.7), 3).unwrap();
        let c = t.inputs().column(2);
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c.len() as f64).sqrt();
        assert!((mean - 0.7).abs() < 0.01);
        assert!((sd - 0.14).abs() < 0.01);
    }

    #[test]
    fn default_market_has_1040_rows() {
        let d = gen_price_sale(&MarketScenario::default()).unwrap();
        assert_eq!(d.data.n_rows(), 1040);
        assert_eq!(d.brand_dataset(2).n_rows(), 208);
    }

    #[test]
    fn zero_noise_is_exactly_log_linear() {
        let s = MarketScenario {
            noise_parameter: 0.0,
            ..MarketScenario::default()
        };
        let d = gen_price_sale(&s).unwrap();
        for i in 0..d.data.n_rows() {
            let beta = s.brand_elasticities[d.brand[i]];
            assert_eq!(d.data.response().unwrap()[i], beta * d.data.inputs()[(i, 0)]);
        }
    }

    #[test]
    fn invalid_markets_are_rejected() {
        let s = MarketScenario {
            brand_elasticities: vec![-0.5],
            brand_intercepts: vec![1.0],
            ..MarketScenario::default()
        };
        assert!(gen_price_sale(&s).is_err());
        let s = MarketScenario {
            price_model: PriceModel::Uniform { low: -1.0, high: 2.0 },
            ..MarketScenario::default()
        };
        assert!(gen_price_sale(&s).is_err());
        assert!(log_prices(&[2.0, -1.0]).is_err());
    }
}
