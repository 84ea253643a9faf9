//! Prediction and marketing metrics.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Mean squared error.
pub fn mse(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: (truth.len(), 1),
            found: (predictions.len(), 1),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("no predictions"));
    }
    Ok(predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / truth.len() as f64)
}

/// Relative MSE improvement in percent of training on synthetic plus public
/// data over public data alone.
pub fn delta_mse(mse_public_only: f64, mse_combined: f64) -> Result<f64> {
    if !(mse_public_only > 0.0) {
        return Err(Error::param(
            "msePublicOnly",
            mse_public_only,
            "must be positive for a relative change",
        ));
    }
    Ok((mse_public_only - mse_combined) / mse_public_only * 100.0)
}

/// No-intercept least squares slope `Σxy / Σx²`.
pub fn estimate_elasticity_xy(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: (x.len(), 1),
            found: (y.len(), 1),
        });
    }
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if !(sxx > 0.0) {
        return Err(Error::Invalid("elasticity needs at least one nonzero input".into()));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx)
}

/// Elasticity from a single-input dataset of adjusted log sales.
pub fn estimate_elasticity(data: &Dataset) -> Result<f64> {
    if data.n_cols() != 1 {
        return Err(Error::ShapeMismatch {
            expected: (data.n_rows(), 1),
            found: (data.n_rows(), data.n_cols()),
        });
    }
    estimate_elasticity_xy(&data.inputs().column(0), data.require_response()?)
}

/// Optimal mark-up in percent; `None` when `|β̂| = 1`.
pub fn omu(beta_hat: f64) -> Option<f64> {
    let denom = beta_hat.abs() - 1.0;
    (denom != 0.0).then(|| 100.0 / denom)
}

/// Optimal profit ratio in percent; `None` when `β̂ = -1` or `β = 0`.
pub fn opr(beta: f64, beta_hat: f64) -> Option<f64> {
    if beta_hat == -1.0 || beta == 0.0 {
        return None;
    }
    let r = (beta + 1.0) / (beta_hat + 1.0);
    let v = r * (r * beta_hat / beta).powf(beta) * 100.0;
    v.is_finite().then_some(v)
}

/// Mean absolute percentage deviation of the estimates.
pub fn mapd(true_betas: &[f64], estimated: &[f64]) -> Result<f64> {
    if true_betas.len() != estimated.len() {
        return Err(Error::ShapeMismatch {
            expected: (true_betas.len(), 1),
            found: (estimated.len(), 1),
        });
    }
    if true_betas.is_empty() {
        return Err(Error::Empty("no brands"));
    }
    if let Some(&b) = true_betas.iter().find(|b| **b == 0.0) {
        return Err(Error::param("beta", b, "true elasticity must be nonzero"));
    }
    Ok(100.0 / true_betas.len() as f64
        * true_betas
            .iter()
            .zip(estimated)
            .map(|(b, e)| (e - b).abs() / b.abs())
            .sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MarketingMetrics {
    pub omu_percent: Vec<Option<f64>>,
    pub opr_percent: Vec<Option<f64>>,
    pub mapd_percent: f64,
}

pub fn marketing_metrics(true_betas: &[f64], estimated: &[f64]) -> Result<MarketingMetrics> {
    let mapd_percent = mapd(true_betas, estimated)?;
    Ok(MarketingMetrics {
        omu_percent: estimated.iter().map(|&b| omu(b)).collect(),
        opr_percent: true_betas.iter().zip(estimated).map(|(&b, &e)| opr(b, e)).collect(),
        mapd_percent,
    })
}
