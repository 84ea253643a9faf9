//! Per-column marginal models: Gaussian KDE, tabulated CDF and its inverse.

use std::f64::consts::PI;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Default relative bandwidth grid `{0.05, 0.10, ..., 2.00}`.
pub fn default_bandwidth_grid() -> Vec<f64> {
    (1..=40).map(|k| k as f64 * 0.05).collect()
}

pub const DEFAULT_FOLDS: usize = 5;
pub const MIN_GRID_POINTS: usize = 512;
const MAX_GRID_POINTS: usize = 1 << 16;
const NODES_PER_CELL: usize = 16;
const SUPPORT_PAD: f64 = 3.0;
// exp(-0.5 * 38.6^2) underflows to zero in f64.
const KERNEL_CUTOFF: f64 = 38.6;

/// One input column in raw units.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSample {
    values: Vec<f64>,
    column_index: usize,
}

impl ColumnSample {
    pub fn new(values: Vec<f64>, column_index: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("column has no values"));
        }
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row,
                column: column_index,
            });
        }
        Ok(Self {
            values,
            column_index,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_index(&self) -> usize {
        self.column_index
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Standard deviation with divisor `n`.
    pub fn std_dev(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        (self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// Fitted KDE with its tabulated CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    bandwidth: f64,
    normalizer: f64,
    /// Sorted training values.
    samples: Vec<f64>,
    grid: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

/// Unnormalized kernel sum `Σ exp(-½((x-x_k)/h)²)` over sorted samples.
fn kernel_sum(sorted: &[f64], h: f64, x: f64) -> f64 {
    let reach = KERNEL_CUTOFF * h;
    let start = sorted.partition_point(|&v| v < x - reach);
    let inv_h = 1.0 / h;
    let mut s = 0.0;
    for &v in &sorted[start..] {
        if v > x + reach {
            break;
        }
        let z = (x - v) * inv_h;
        s += (-0.5 * z * z).exp();
    }
    s
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Fits a Gaussian KDE with the given bandwidth and tabulates its CDF.
pub fn fit_kde(column: &ColumnSample, bandwidth: f64) -> Result<MarginalModel> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::param("bandwidth", bandwidth, "must be positive and finite"));
    }
    let samples = sorted_copy(column.values());
    let n = samples.len() as f64;
    let lo = samples[0] - SUPPORT_PAD * bandwidth;
    let hi = samples[samples.len() - 1] + SUPPORT_PAD * bandwidth;

    // Keep the cell width at or below h/2 so linear interpolation of the CDF
    // stays accurate even for wide, sparse columns.
    let wanted = ((hi - lo) / (0.5 * bandwidth)).ceil() as usize + 1;
    let points = wanted.clamp(MIN_GRID_POINTS, MAX_GRID_POINTS);
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points)
        .map(|k| if k + 1 == points { hi } else { lo + k as f64 * step })
        .collect();

    let rule = GaussLegendre::new(NODES_PER_CELL)?;
    let raw = |x: f64| kernel_sum(&samples, bandwidth, x) / n;
    let mut cumulative = Vec::with_capacity(points);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for w in grid.windows(2) {
        acc += rule.integrate(w[0], w[1], raw);
        cumulative.push(acc);
    }
    if !(acc > 0.0 && acc.is_finite()) {
        return Err(Error::Invalid(format!(
            "column {}: density integrates to {acc}",
            column.column_index()
        )));
    }
    let normalizer = 1.0 / acc;
    let mut cdf: Vec<f64> = cumulative.iter().map(|c| (c * normalizer).min(1.0)).collect();
    *cdf.last_mut().expect("grid has points") = 1.0;
    let density = grid.iter().map(|&x| normalizer * raw(x)).collect();

    Ok(MarginalModel {
        bandwidth,
        normalizer,
        samples,
        grid,
        density,
        cdf,
    })
}

/// Grid value maximizing the mean held-out log-likelihood under `folds`-fold
/// CV. Fold `f` holds the points with index `i % folds == f`. Ties go to the
/// smaller bandwidth.
pub fn select_bandwidth(column: &ColumnSample, grid: &[f64], folds: usize) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty("bandwidth grid"));
    }
    if let Some(&bad) = grid.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::param("bandwidth", bad, "grid values must be positive"));
    }
    if folds < 2 {
        return Err(Error::param("folds", folds as f64, "need at least two folds"));
    }
    let n = column.len();
    if n < folds {
        return Err(Error::TooFewSamples {
            needed: folds,
            found: n,
        });
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }

    let splits: Vec<(Vec<f64>, Vec<f64>)> = (0..folds)
        .map(|f| {
            let (mut train, mut held) = (Vec::new(), Vec::new());
            for (i, &v) in column.values().iter().enumerate() {
                if i % folds == f {
                    held.push(v);
                } else {
                    train.push(v);
                }
            }
            train.sort_by(f64::total_cmp);
            (train, held)
        })
        .collect();

    let mut best = (f64::NEG_INFINITY, grid[0]);
    let mut sorted_grid = grid.to_vec();
    sorted_grid.sort_by(f64::total_cmp);
    for &h in &sorted_grid {
        let score = splits
            .iter()
            .map(|(train, held)| held_out_log_likelihood(train, held, h))
            .sum::<f64>()
            / folds as f64;
        debug!("column {} bandwidth {h}: cv log-likelihood {score}", column.column_index());
        if score > best.0 {
            best = (score, h);
        }
    }
    Ok(best.1)
}

fn held_out_log_likelihood(train: &[f64], held: &[f64], h: f64) -> f64 {
    let log_norm = (train.len() as f64 * h * (2.0 * PI).sqrt()).ln();
    held.iter()
        .map(|&x| kernel_sum(train, h, x).ln() - log_norm)
        .sum::<f64>()
        / held.len() as f64
}

/// Selects a bandwidth from `relative_grid` scaled by the column's standard
/// deviation (raw units when the column is constant) and fits the KDE.
pub fn fit_column(column: &ColumnSample, relative_grid: &[f64], folds: usize) -> Result<MarginalModel> {
    let sd = column.std_dev();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let grid: Vec<f64> = relative_grid.iter().map(|g| g * scale).collect();
    let folds = folds.min(column.len());
    let h = if folds < 2 {
        grid[0]
    } else {
        select_bandwidth(column, &grid, folds)?
    };
    fit_kde(column, h)
}

impl MarginalModel {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn support(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    pub fn density_grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().copied().zip(self.density.iter().copied())
    }

    pub fn cdf_grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().copied().zip(self.cdf.iter().copied())
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    /// Normalized density at `x`; zero outside the support window.
    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        self.normalizer * kernel_sum(&self.samples, self.bandwidth, x) / self.samples.len() as f64
    }

    /// Linear interpolation of the tabulated CDF, clamped to `[0, 1]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let k = self.grid.partition_point(|&g| g <= x).clamp(1, self.grid.len() - 1);
        let (x0, x1) = (self.grid[k - 1], self.grid[k]);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        (c0 + (c1 - c0) * (x - x0) / (x1 - x0)).clamp(0.0, 1.0)
    }

    /// `inf{x : F(x) >= q}` on the interpolated CDF.
    pub fn icdf(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::param("q", q, "quantile level must lie in [0, 1]"));
        }
        Ok(self.icdf_unchecked(q))
    }

    pub(crate) fn icdf_unchecked(&self, q: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c < q);
        if k == 0 {
            return self.grid[0];
        }
        if k >= self.cdf.len() {
            return self.grid[self.grid.len() - 1];
        }
        if self.cdf[k] == q {
            return self.grid[k];
        }
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let (x0, x1) = (self.grid[k - 1], self.grid[k]);
        (x0 + (x1 - x0) * (q - c0) / (c1 - c0)).min(x1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn uniform(n: usize, seed: u64) -> ColumnSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ColumnSample::new((0..n).map(|_| rng.random::<f64>()).collect(), 0).unwrap()
    }

    // Closed-form normalizer: each kernel's mass inside the window via Phi.
    fn analytic_normalizer(values: &[f64], h: f64, lo: f64, hi: f64) -> f64 {
        let mass: f64 = values
            .iter()
            .map(|&v| normal::cdf((hi - v) / h) - normal::cdf((lo - v) / h))
            .sum();
        values.len() as f64 / (h * (2.0 * PI).sqrt() * mass)
    }

    fn empirical_cdf(values: &[f64], x: f64) -> f64 {
        values.iter().filter(|&&v| v <= x).count() as f64 / values.len() as f64
    }

    #[test]
    fn single_point_is_symmetric() {
        let col = ColumnSample::new(vec![0.5], 0).unwrap();
        let m = fit_kde(&col, 0.1).unwrap();
        assert!((m.cdf(0.5) - 0.5).abs() < 1e-3);
        assert!((m.support().0 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let col = ColumnSample::new(vec![0.5], 0).unwrap();
        assert!(fit_kde(&col, 0.0).is_err());
        assert!(fit_kde(&col, -1.0).is_err());
        assert!(matches!(
            ColumnSample::new(vec![1.0, f64::NAN], 4),
            Err(Error::NonFinite { row: 1, column: 4 })
        ));
        assert!(select_bandwidth(&col, &[0.1], 2).is_err());
        let m = fit_kde(&col, 0.1).unwrap();
        assert!(m.icdf(1.5).is_err());
        assert!(m.icdf(-0.1).is_err());
    }

    #[test]
    fn normalizer_matches_closed_form() {
        let col = uniform(300, 3);
        for h in [0.01, 0.07, 0.4] {
            let m = fit_kde(&col, h).unwrap();
            let (lo, hi) = m.support();
            let want = analytic_normalizer(col.values(), h, lo, hi);
            assert!((m.normalizer() / want - 1.0).abs() < 1e-9, "h = {h}");
        }
    }

    #[test]
    fn uniform_cdf_and_icdf_match_empirical() {
        let col = uniform(1000, 11);
        let m = fit_column(&col, &default_bandwidth_grid(), DEFAULT_FOLDS).unwrap();
        let mut sorted = col.values().to_vec();
        sorted.sort_by(f64::total_cmp);
        for q in [0.25, 0.5, 0.75] {
            let xq = sorted[(q * 1000.0) as usize];
            assert!((m.cdf(xq) - q).abs() < 0.05);
        }
        assert!((m.cdf(0.5) - empirical_cdf(col.values(), 0.5)).abs() < 0.02);
        assert!((m.icdf(0.25).unwrap() - sorted[250]).abs() < 0.03);
        assert!((m.icdf(0.25).unwrap() - 0.25).abs() < 0.03);
    }

    #[test]
    fn icdf_endpoints_and_clamping() {
        let m = fit_kde(&uniform(50, 1), 0.05).unwrap();
        let (lo, hi) = m.support();
        assert_eq!(m.icdf(0.0).unwrap(), lo);
        assert_eq!(m.icdf(1.0).unwrap(), hi);
        assert_eq!(m.cdf(lo - 1.0), 0.0);
        assert_eq!(m.cdf(hi + 1.0), 1.0);
    }

    #[test]
    fn bandwidth_cv_on_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let col = ColumnSample::new((0..500).map(|_| rng.sample(StandardNormal)).collect(), 0).unwrap();
        let h = select_bandwidth(&col, &default_bandwidth_grid(), 5).unwrap();
        assert!((0.1..=0.6).contains(&h), "h = {h}");
        assert_eq!(select_bandwidth(&col, &[0.3], 5).unwrap(), 0.3);
    }

    // Brute-force CV oracle: direct double loop, analytic normalization, no
    // kernel cutoff and no sorting.
    #[test]
    fn bandwidth_cv_matches_brute_force() {
        let col = uniform(60, 8);
        let grid = [0.02, 0.05, 0.1, 0.2, 0.5];
        let k = 3;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &h in &grid {
            let mut total = 0.0;
            for f in 0..k {
                let v = col.values();
                let train: Vec<f64> = (0..v.len()).filter(|i| i % k != f).map(|i| v[i]).collect();
                let held: Vec<f64> = (0..v.len()).filter(|i| i % k == f).map(|i| v[i]).collect();
                let mut ll = 0.0;
                for &x in &held {
                    let d: f64 = train
                        .iter()
                        .map(|&t| (-0.5 * ((x - t) / h).powi(2)).exp())
                        .sum::<f64>()
                        / (train.len() as f64 * h * (2.0 * PI).sqrt());
                    ll += d.ln();
                }
                total += ll / held.len() as f64;
            }
            if total / k as f64 > best.0 {
                best = (total / k as f64, h);
            }
        }
        assert_eq!(select_bandwidth(&col, &grid, k).unwrap(), best.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn cdf_monotone_normalized_and_round_trips(
            values in prop::collection::vec(-50.0f64..50.0, 1..40),
            rel in 0.01f64..2.0,
        ) {
            let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - values.iter().cloned().fold(f64::INFINITY, f64::min);
            let h = rel * spread.max(0.1);
            let m = fit_kde(&ColumnSample::new(values, 0).unwrap(), h).unwrap();
            let cdf: Vec<f64> = m.cdf_grid().map(|(_, c)| c).collect();
            prop_assert!(cdf[0].abs() < 1e-9);
            prop_assert!((cdf[cdf.len() - 1] - 1.0).abs() < 1e-9);
            prop_assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(m.density_grid().all(|(_, d)| d >= 0.0));

            let (lo, hi) = m.support();
            let mut prev = 0.0;
            for k in 0..=200 {
                let x = lo - 1.0 + (hi - lo + 2.0) * k as f64 / 200.0;
                let c = m.cdf(x);
                prop_assert!(c >= prev);
                prev = c;
            }
            let eps_grid = m.cdf_grid().map(|(_, c)| c).collect::<Vec<_>>()
                .windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            for k in 0..=100 {
                let q = k as f64 / 100.0;
                let c = m.cdf(m.icdf(q).unwrap());
                prop_assert!(c >= q - 1e-6);
                prop_assert!(c <= q + eps_grid + 1e-12);
            }
        }
    }
}
