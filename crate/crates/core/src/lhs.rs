//! Stage-1 input synthesis: Latin hypercube sampling with Iman–Conover
//! correlation induction, plus the independent baseline samplers.

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, Weibull};
use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::linalg::{self, PivotFailure};
use crate::marginals::MarginalModel;
use crate::normal;
use crate::rng;

const PSD_TOLERANCE: f64 = 1e-10;
const RIDGE_FACTOR: f64 = 1e-8;
const UNIT_CLAMP: f64 = 1e-9;

/// Stage-1 generator of pure synthetic inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Stage1Sampler {
    /// Statistics-retaining LHS + Iman–Conover synthesis.
    Sh,
    /// Independent `U(0, 1)` entries.
    Random,
    /// Independent `Weibull(scale, shape)` entries.
    RanWeibull { scale: f64, shape: f64 },
    /// Independent `Cauchy(location, scale)` entries.
    RanCauchy { location: f64, scale: f64 },
}

impl Default for Stage1Sampler {
    fn default() -> Self {
        Stage1Sampler::Sh
    }
}

impl Stage1Sampler {
    pub fn weibull() -> Self {
        Stage1Sampler::RanWeibull {
            scale: 1.0,
            shape: 8.0,
        }
    }

    pub fn cauchy() -> Self {
        Stage1Sampler::RanCauchy {
            location: 0.0,
            scale: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Stage1Sampler::Sh => "sh",
            Stage1Sampler::Random => "random",
            Stage1Sampler::RanWeibull { .. } => "weibull",
            Stage1Sampler::RanCauchy { .. } => "cauchy",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Stage1Sampler::RanWeibull { scale, shape } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::param("weibull scale", scale, "must be positive"));
                }
                if !(shape > 0.0 && shape.is_finite()) {
                    return Err(Error::param("weibull shape", shape, "must be positive"));
                }
            }
            Stage1Sampler::RanCauchy { location, scale } => {
                if !location.is_finite() {
                    return Err(Error::param("cauchy location", location, "must be finite"));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::param("cauchy scale", scale, "must be positive"));
                }
            }
            Stage1Sampler::Sh | Stage1Sampler::Random => {}
        }
        Ok(())
    }
}

/// `n x d` Latin hypercube on stratum centers `(k - 0.5)/n`, each column an
/// independent permutation.
pub fn lhs_unit_sample(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = rng::rng(seed);
    let centers: Vec<f64> = (1..=n).map(|k| (k as f64 - 0.5) / n as f64).collect();
    let mut out = Matrix::zeros(n, d);
    let mut column = centers.clone();
    for j in 0..d {
        column.copy_from_slice(&centers);
        column.shuffle(&mut rng);
        for (i, &v) in column.iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

/// Validates a covariance target and returns its lower Cholesky factor,
/// adding a small ridge when it is singular but not indefinite.
pub fn target_factor(target: &Matrix) -> Result<Matrix> {
    let d = target.rows();
    if target.cols() != d {
        return Err(Error::ShapeMismatch {
            expected: (d, d),
            found: target.shape(),
        });
    }
    if d == 0 {
        return Err(Error::Empty("covariance target"));
    }
    if let Some((row, column)) = target.find_non_finite() {
        return Err(Error::NonFinite { row, column });
    }
    for j in 0..d {
        if !(target[(j, j)] > 0.0) {
            return Err(Error::NotPositiveSemidefinite {
                index: j,
                pivot: target[(j, j)],
            });
        }
        for k in 0..j {
            if (target[(j, k)] - target[(k, j)]).abs() > PSD_TOLERANCE {
                return Err(Error::Invalid(format!(
                    "covariance target is not symmetric at ({j}, {k})"
                )));
            }
        }
    }
    match linalg::cholesky(target, PSD_TOLERANCE) {
        Ok(l) => Ok(l),
        Err(PivotFailure { index, pivot }) if pivot < -PSD_TOLERANCE => {
            Err(Error::NotPositiveSemidefinite { index, pivot })
        }
        Err(PivotFailure { index, pivot }) => {
            let ridge = RIDGE_FACTOR * linalg::trace(target) / d as f64;
            warn!(
                "covariance target is singular (pivot {pivot:e} at index {index}); adding ridge {ridge:e}"
            );
            let mut ridged = target.clone();
            for j in 0..d {
                ridged[(j, j)] += ridge;
            }
            linalg::cholesky(&ridged, 0.0)
                .map_err(|f| Error::NotPositiveSemidefinite {
                    index: f.index,
                    pivot: f.pivot,
                })
        }
    }
}

/// Normal scores `R = V'(P Q^-1)ᵀ` whose sample covariance equals `target`.
pub fn iman_conover_scores(unit: &Matrix, target: &Matrix) -> Result<Matrix> {
    let (n, d) = unit.shape();
    if target.shape() != (d, d) {
        return Err(Error::ShapeMismatch {
            expected: (d, d),
            found: target.shape(),
        });
    }
    if n <= d {
        return Err(Error::TooFewSamples {
            needed: d + 1,
            found: n,
        });
    }
    if let Some(&bad) = unit.as_slice().iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::param("unit sample", bad, "entries must lie in (0, 1)"));
    }
    let p = target_factor(target)?;
    let scores = unit.map(normal::quantile);
    let sample_cov = linalg::covariance(&scores);
    let floor = 1e-12 * linalg::trace(&sample_cov).max(f64::MIN_POSITIVE) / d as f64;
    let q = linalg::cholesky(&sample_cov, floor)
        .map_err(|f| Error::SingularSampleCovariance {
            index: f.index,
            pivot: f.pivot,
        })?;
    let transform = p.matmul(&linalg::invert_lower(&q))?;
    scores.matmul(&transform.transpose())
}

/// `Φ(R)` clamped to `[1e-9, 1 - 1e-9]`.
pub fn iman_conover_induce(unit: &Matrix, target: &Matrix) -> Result<Matrix> {
    Ok(iman_conover_scores(unit, target)?
        .map(|r| normal::cdf(r).clamp(UNIT_CLAMP, 1.0 - UNIT_CLAMP)))
}

/// Synthetic inputs with each column's marginal and the input correlation
/// structure of `original` retained.
///
/// The correlation matrix of `original` is used as the copula target so that
/// the induced scores stay standard normal and `Φ` maps them back onto the
/// unit interval without distorting the marginals.
pub fn synthesize(original: &Matrix, models: &[MarginalModel], seed: u64) -> Result<Matrix> {
    let (n, d) = original.shape();
    if models.len() != d {
        return Err(Error::ShapeMismatch {
            expected: (n, d),
            found: (n, models.len()),
        });
    }
    if n <= d {
        return Err(Error::TooFewSamples {
            needed: d + 1,
            found: n,
        });
    }
    let target = linalg::correlation_from_covariance(&linalg::covariance(original));
    let unit = lhs_unit_sample(n, d, seed);
    let induced = iman_conover_induce(&unit, &target)?;
    let mut out = induced;
    for i in 0..n {
        for (j, model) in models.iter().enumerate() {
            out[(i, j)] = model.icdf_unchecked(out[(i, j)]);
        }
    }
    Ok(out)
}

/// Independent draws from one of the baseline samplers. `Sh` has no
/// standalone distribution and is rejected here.
pub fn baseline_sample(kind: Stage1Sampler, n: usize, d: usize, seed: u64) -> Result<Matrix> {
    kind.validate()?;
    let mut rng = rng::rng(seed);
    match kind {
        Stage1Sampler::Random => Ok(Matrix::from_fn(n, d, |_, _| rng.random::<f64>())),
        Stage1Sampler::RanWeibull { scale, shape } => {
            let dist = Weibull::new(scale, shape)
                .map_err(|e| Error::Invalid(format!("weibull: {e}")))?;
            Ok(Matrix::from_fn(n, d, |_, _| dist.sample(&mut rng)))
        }
        Stage1Sampler::RanCauchy { location, scale } => {
            let dist = Cauchy::new(location, scale)
                .map_err(|e| Error::Invalid(format!("cauchy: {e}")))?;
            Ok(Matrix::from_fn(n, d, |_, _| dist.sample(&mut rng)))
        }
        Stage1Sampler::Sh => Err(Error::Invalid(
            "the SH sampler needs fitted marginals; use synthesize".into(),
        )),
    }
}
