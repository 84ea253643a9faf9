//! Repeated trials and their aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measurement from one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricRow {
    pub preset: String,
    /// Free-form scenario qualifier, e.g. `sampler=sh` or `mu=0.3`.
    pub setting: String,
    pub alpha: Option<f64>,
    pub model: String,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(
        preset: &str,
        setting: impl Into<String>,
        alpha: Option<f64>,
        model: &str,
        metric: impl Into<String>,
        value: f64,
    ) -> Self {
        Self {
            preset: preset.to_owned(),
            setting: setting.into(),
            alpha,
            model: model.to_owned(),
            metric: metric.into(),
            value,
        }
    }

    fn key(&self) -> (&str, &str, Option<u64>, &str, &str) {
        (
            &self.preset,
            &self.setting,
            self.alpha.map(f64::to_bits),
            &self.model,
            &self.metric,
        )
    }
}

/// Mean and sample standard deviation of one metric across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AggregateRow {
    pub preset: String,
    pub setting: String,
    pub alpha: Option<f64>,
    pub model: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricTable {
    pub rows: Vec<AggregateRow>,
}

impl MetricTable {
    pub fn find(&self, setting: &str, alpha: Option<f64>, model: &str, metric: &str) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| {
            r.setting == setting && r.alpha == alpha && r.model == model && r.metric == metric
        })
    }
}

/// Groups rows by `(preset, setting, alpha, model, metric)` in order of first
/// appearance and reduces each group.
pub fn aggregate(per_trial: &[Vec<MetricRow>]) -> MetricTable {
    let mut groups: Vec<(MetricRow, Vec<f64>)> = Vec::new();
    for rows in per_trial {
        for row in rows {
            match groups.iter_mut().find(|(g, _)| g.key() == row.key()) {
                Some((_, values)) => values.push(row.value),
                None => groups.push((row.clone(), vec![row.value])),
            }
        }
    }
    let rows = groups
        .into_iter()
        .map(|(g, values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                preset: g.preset,
                setting: g.setting,
                alpha: g.alpha,
                model: g.model,
                metric: g.metric,
                mean,
                std,
                trials: n,
            }
        })
        .collect();
    MetricTable { rows }
}

/// Runs `trial(base_seed + t)` for `t = 0..trials` and aggregates. Trials may
/// run concurrently; results are reduced in trial order.
pub fn run_trials<F>(trials: usize, base_seed: u64, trial: F) -> Result<MetricTable>
where
    F: Fn(u64) -> Result<Vec<MetricRow>> + Sync,
{
    if trials < 1 {
        return Err(Error::param("trials", trials as f64, "need at least one trial"));
    }
    let per_trial = (0..trials as u64)
        .into_par_iter()
        .map(|t| trial(base_seed.wrapping_add(t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&per_trial))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64) -> MetricRow {
        MetricRow::new("p", "", Some(0.5), "krr", "mse", v)
    }

    #[test]
    fn single_trial_has_zero_std() {
        let t = run_trials(1, 3, |s| Ok(vec![row(s as f64)])).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].mean, 3.0);
        assert_eq!(t.rows[0].std, 0.0);
    }

    #[test]
    fn identical_trials_have_zero_std() {
        let t = run_trials(4, 0, |_| Ok(vec![row(1.25)])).unwrap();
        assert_eq!(t.rows[0].std, 0.0);
        assert_eq!(t.rows[0].trials, 4);
    }

    #[test]
    fn seeds_are_consecutive_and_std_is_sample_std() {
        let t = run_trials(3, 10, |s| Ok(vec![row(s as f64)])).unwrap();
        assert_eq!(t.rows[0].mean, 11.0);
        assert!((t.rows[0].std - 1.0).abs() < 1e-15);
        assert!(run_trials(0, 0, |_| Ok(vec![])).is_err());
    }

    #[test]
    fn groups_by_full_key() {
        let t = aggregate(&[vec![
            row(1.0),
            MetricRow::new("p", "", Some(0.2), "krr", "mse", 2.0),
            MetricRow::new("p", "", Some(0.5), "nwk", "mse", 3.0),
        ]]);
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.find("", Some(0.2), "krr", "mse").unwrap().mean, 2.0);
    }
}
