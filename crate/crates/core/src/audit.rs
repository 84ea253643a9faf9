//! Privacy (LID) and fidelity (TV norm, moment deltas) measurements.

use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_BIN_COUNT: usize = 50;
const RELATIVE_FLOOR: f64 = 1e-12;
const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrivacyReport {
    pub lid_percent: f64,
    pub eta: f64,
    pub breached_records: usize,
    pub records: usize,
    pub per_dimension_breach_counts: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theoretical_bound_percent: Option<f64>,
}

/// Row-aligned LID: record `i` is breached when any coordinate of the
/// synthetic row `i` is within `eta` of the original.
pub fn compute_lid(original: &Matrix, synthetic: &Matrix, eta: f64) -> Result<PrivacyReport> {
    if original.shape() != synthetic.shape() {
        return Err(Error::ShapeMismatch {
            expected: original.shape(),
            found: synthetic.shape(),
        });
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param("eta", eta, "must be positive"));
    }
    let (n, d) = original.shape();
    if n == 0 {
        return Err(Error::Empty("no records to audit"));
    }
    let mut per_dim = vec![0usize; d];
    let mut breached = 0usize;
    for (x, s) in original.iter_rows().zip(synthetic.iter_rows()) {
        let mut hit = false;
        for j in 0..d {
            if (x[j] - s[j]).abs() <= eta {
                per_dim[j] += 1;
                hit = true;
            }
        }
        breached += usize::from(hit);
    }
    Ok(PrivacyReport {
        lid_percent: 100.0 * breached as f64 / n as f64,
        eta,
        breached_records: breached,
        records: n,
        per_dimension_breach_counts: per_dim,
        theoretical_bound_percent: None,
    })
}

/// Closed-form LID bound in percent for uniform marginals on an interval of
/// width `range_width`.
pub fn lid_bound(alpha: f64, eta: f64, d: usize, range_width: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::param("alpha", alpha, "must lie in [0, 1)"));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::param("eta", eta, "must be non-negative"));
    }
    if d < 1 {
        return Err(Error::param("d", d as f64, "need at least one dimension"));
    }
    if !(range_width > 0.0 && range_width.is_finite()) {
        return Err(Error::param("rangeWidth", range_width, "must be positive"));
    }
    let ratio = 2.0 * eta / (range_width * (1.0 - alpha));
    if !(ratio < 1.0) {
        return Err(Error::BoundDomainExceeded { ratio });
    }
    Ok(-(d as f64 * (-ratio).ln_1p()).exp_m1() * 100.0)
}

/// Half the L1 distance between two probability vectors.
pub fn tv_norm(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch {
            expected: (p.len(), 1),
            found: (q.len(), 1),
        });
    }
    for v in [p, q] {
        if let Some(&bad) = v.iter().find(|x| !(**x >= 0.0)) {
            return Err(Error::param("probability", bad, "entries must be non-negative"));
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
    }
    let tv = 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(tv.min(1.0))
}

/// TV norm between histograms on `bins` shared equal-width bins spanning both
/// samples.
pub fn histogram_tv(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::param("binCount", bins as f64, "need at least two bins"));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("histogram column"));
    }
    let lo = a.iter().chain(b).cloned().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Invalid("histogram column contains non-finite values".into()));
    }
    let hist = |v: &[f64]| {
        let mut h = vec![0.0; bins];
        let width = hi - lo;
        for &x in v {
            let k = if width > 0.0 {
                (((x - lo) / width) * bins as f64) as usize
            } else {
                0
            };
            h[k.min(bins - 1)] += 1.0;
        }
        let n = v.len() as f64;
        h.iter_mut().for_each(|c| *c /= n);
        h
    };
    let (p, q) = (hist(a), hist(b));
    // Counts divided by n can miss 1 by a few ulps; renormalize exactly.
    let renorm = |v: Vec<f64>| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    tv_norm(&renorm(p), &renorm(q))
}

/// A moment difference, relative to the original moment unless that moment
/// is numerically zero, in which case it is absolute and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentDelta {
    pub value: f64,
    pub absolute: bool,
}

impl MomentDelta {
    fn between(original: f64, synthetic: f64) -> Self {
        let diff = (original - synthetic).abs();
        if original.abs() < RELATIVE_FLOOR {
            MomentDelta {
                value: diff,
                absolute: true,
            }
        } else {
            MomentDelta {
                value: diff / original.abs(),
                absolute: false,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentDeltas {
    pub mean_deltas: Vec<MomentDelta>,
    pub variance_deltas: Vec<MomentDelta>,
    pub covariance_deltas: Vec<Vec<MomentDelta>>,
}

/// Relative deltas of column means, variances and covariances (divisor n).
pub fn moment_deltas(original: &Matrix, synthetic: &Matrix) -> Result<MomentDeltas> {
    if original.cols() != synthetic.cols() {
        return Err(Error::ShapeMismatch {
            expected: (synthetic.rows(), original.cols()),
            found: synthetic.shape(),
        });
    }
    if original.rows() == 0 || synthetic.rows() == 0 {
        return Err(Error::Empty("moment deltas need rows on both sides"));
    }
    let d = original.cols();
    let (mu, mu_s) = (linalg::column_means(original), linalg::column_means(synthetic));
    let (c, c_s) = (linalg::covariance(original), linalg::covariance(synthetic));
    Ok(MomentDeltas {
        mean_deltas: (0..d).map(|j| MomentDelta::between(mu[j], mu_s[j])).collect(),
        variance_deltas: (0..d).map(|j| MomentDelta::between(c[(j, j)], c_s[(j, j)])).collect(),
        covariance_deltas: (0..d)
            .map(|j| (0..d).map(|k| MomentDelta::between(c[(j, k)], c_s[(j, k)])).collect())
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FidelityReport {
    pub tv_norm: Vec<f64>,
    pub mean_tv_norm: f64,
    pub bin_count: usize,
    #[serde(flatten)]
    pub moments: MomentDeltas,
}

pub fn fidelity(original: &Matrix, synthetic: &Matrix, bins: usize) -> Result<FidelityReport> {
    let moments = moment_deltas(original, synthetic)?;
    let tv = (0..original.cols())
        .map(|j| histogram_tv(&original.column(j), &synthetic.column(j), bins))
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelityReport {
        mean_tv_norm: tv.iter().sum::<f64>() / tv.len() as f64,
        tv_norm: tv,
        bin_count: bins,
        moments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn lid_examples() {
        let x = m(&[&[0.1, 0.2], &[0.3, 0.4]]);
        assert_eq!(compute_lid(&x, &x, 1e-6).unwrap().lid_percent, 100.0);
        assert_eq!(compute_lid(&m(&[&[0.5]]), &m(&[&[0.6]]), 0.001).unwrap().lid_percent, 0.0);
        let s = m(&[&[0.1005, 0.9], &[0.9, 0.4]]);
        let r = compute_lid(&x, &s, 0.001).unwrap();
        assert_eq!(r.lid_percent, 100.0);
        assert_eq!(r.per_dimension_breach_counts, vec![1, 1]);
        assert!(compute_lid(&x, &m(&[&[0.1, 0.2]]), 0.1).is_err());
    }

    #[test]
    fn bound_examples() {
        assert!((lid_bound(0.2, 0.0001, 1, 1.0).unwrap() - 0.025).abs() < 1e-12);
        assert_eq!(lid_bound(0.7, 0.0, 4, 1.0).unwrap(), 0.0);
        // Tolerance on the bound as a fraction: α is rounded to five places.
        assert!((lid_bound(0.942_04, 0.001, 3, 1.0).unwrap() / 100.0 - 0.1).abs() < 1e-4);
        let err = lid_bound(0.9, 0.1, 2, 1.0).unwrap_err();
        assert!(err.to_string().contains("bound formula domain exceeded"));
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_norm(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tv_norm(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(tv_norm(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
        assert!(matches!(tv_norm(&[0.5, 0.4], &[1.0, 0.0]), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn histogram_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let far: Vec<f64> = b.iter().map(|v| v + 2.0).collect();
        assert_eq!(histogram_tv(&a, &a, 50).unwrap(), 0.0);
        assert!(histogram_tv(&a, &b, 50).unwrap() < 0.08);
        assert!((histogram_tv(&a, &far, 50).unwrap() - 1.0).abs() < 1e-9);
        assert!(histogram_tv(&a, &[], 50).is_err());
        assert!(histogram_tv(&a, &b, 1).is_err());
    }

    #[test]
    fn moment_examples() {
        let x = m(&[&[0.4, 0.0, 1.0], &[0.6, 0.0, 3.0]]);
        let r = moment_deltas(&x, &x).unwrap();
        assert!(r.mean_deltas.iter().all(|d| d.value == 0.0));
        let shifted = m(&[&[0.5, 0.0, 1.0], &[0.7, 0.0, 3.0]]);
        let r = moment_deltas(&x, &shifted).unwrap();
        assert!((r.mean_deltas[0].value - 0.2).abs() < 1e-12);
        assert!(!r.mean_deltas[0].absolute);
        assert!(r.mean_deltas[1].absolute);
        assert!(r.variance_deltas[0].value.abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lid_is_monotone_in_eta_and_union_consistent(
            n in 1usize..60, d in 1usize..4, seed: u64, e1 in 1e-4f64..0.2, e2 in 1e-4f64..0.2,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Matrix::from_fn(n, d, |_, _| rng.random::<f64>());
            let s = Matrix::from_fn(n, d, |_, _| rng.random::<f64>());
            let (lo, hi) = (e1.min(e2), e1.max(e2));
            let a = compute_lid(&x, &s, lo).unwrap();
            let b = compute_lid(&x, &s, hi).unwrap();
            prop_assert!(a.lid_percent <= b.lid_percent);
            let union = (0..n)
                .filter(|&i| (0..d).any(|j| (x[(i, j)] - s[(i, j)]).abs() <= lo))
                .count();
            prop_assert_eq!(a.lid_percent, 100.0 * union as f64 / n as f64);
            prop_assert!(a.per_dimension_breach_counts.iter().all(|&c| c <= n));
        }

        #[test]
        fn histogram_tv_is_a_metric(
            a in prop::collection::vec(0.0f64..1.0, 1..50),
            b in prop::collection::vec(0.0f64..1.0, 1..50),
            c in prop::collection::vec(0.0f64..1.0, 1..50),
        ) {
            let ab = tv_norm_on_shared(&a, &b, &c, 0, 1);
            let ba = tv_norm_on_shared(&a, &b, &c, 1, 0);
            let ac = tv_norm_on_shared(&a, &b, &c, 0, 2);
            let cb = tv_norm_on_shared(&a, &b, &c, 2, 1);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab <= ac + cb + 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }
    }

    // Histograms of three samples on one common binning, so the triangle
    // inequality is meaningful.
    fn tv_norm_on_shared(a: &[f64], b: &[f64], c: &[f64], i: usize, j: usize) -> f64 {
        let bins = 10;
        let hist = |v: &[f64]| {
            let mut h = vec![0.0; bins];
            for &x in v {
                h[((x * bins as f64) as usize).min(bins - 1)] += 1.0;
            }
            let n = v.len() as f64;
            let h: Vec<f64> = h.iter().map(|c| c / n).collect();
            let s: f64 = h.iter().sum();
            h.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let hs = [hist(a), hist(b), hist(c)];
        tv_norm(&hs[i], &hs[j]).unwrap()
    }
}
