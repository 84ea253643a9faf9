//! Hybrid mixing of original and synthetic inputs.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};

/// How the hybrid weight α is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum HybridConfig {
    /// Fixed α in `[0, 1]`.
    Alpha(f64),
    /// Solve α from a LID budget in percent. Without `range_width` the
    /// smallest observed column range is used.
    #[serde(rename_all = "camelCase")]
    LidBudget {
        budget_percent: f64,
        range_width: Option<f64>,
    },
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig::Alpha(0.5)
    }
}

/// α after resolving a [`HybridConfig`] against data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResolvedAlpha {
    pub alpha: f64,
    /// Range width used by the solver, when a budget was given.
    pub range_width: Option<f64>,
    /// True when the budget was unreachable and α was clamped to 0.
    pub clamped: bool,
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            HybridConfig::Alpha(a) => check_alpha(a),
            HybridConfig::LidBudget {
                budget_percent,
                range_width,
            } => {
                check_budget(budget_percent)?;
                if let Some(w) = range_width {
                    if !(w > 0.0 && w.is_finite()) {
                        return Err(Error::param("rangeWidth", w, "must be positive"));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn resolve(&self, inputs: &Matrix, eta: f64) -> Result<ResolvedAlpha> {
        self.validate()?;
        match *self {
            HybridConfig::Alpha(alpha) => Ok(ResolvedAlpha {
                alpha,
                range_width: None,
                clamped: false,
            }),
            HybridConfig::LidBudget {
                budget_percent,
                range_width,
            } => {
                let width = match range_width {
                    Some(w) => w,
                    None => {
                        let w = min_column_range(inputs);
                        warn!(
                            "LID budget solved with the observed column range {w}; \
                             the bound is only proven for uniform marginals and is heuristic here"
                        );
                        w
                    }
                };
                let (alpha, clamped) =
                    solve_alpha_detailed(budget_percent, eta, inputs.cols(), width)?;
                Ok(ResolvedAlpha {
                    alpha,
                    range_width: Some(width),
                    clamped,
                })
            }
        }
    }
}

fn min_column_range(m: &Matrix) -> f64 {
    (0..m.cols())
        .map(|j| {
            let c = m.column(j);
            let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(f64::INFINITY, f64::min)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", alpha, "must lie in [0, 1]"));
    }
    Ok(())
}

fn check_budget(b: f64) -> Result<()> {
    if !(b > 0.0 && b <= 100.0) {
        return Err(Error::param("lidBudget", b, "must lie in (0, 100] percent"));
    }
    Ok(())
}

/// Greedy nearest pairing: originals in row order each take the closest
/// still-unused synthetic row (lowest index on ties). Entry `i` of the result
/// is the synthetic row paired with original row `i`.
pub fn nearest_pairing(original: &Matrix, synthetic: &Matrix) -> Result<Vec<usize>> {
    if original.shape() != synthetic.shape() {
        return Err(Error::ShapeMismatch {
            expected: original.shape(),
            found: synthetic.shape(),
        });
    }
    let n = original.rows();
    let mut available: Vec<usize> = (0..n).collect();
    let mut pairing = Vec::with_capacity(n);
    for i in 0..n {
        let x = original.row(i);
        let mut best = (f64::INFINITY, 0);
        for (slot, &k) in available.iter().enumerate() {
            let dist: f64 = x
                .iter()
                .zip(synthetic.row(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if slot == 0 || dist < best.0 {
                best = (dist, slot);
            }
        }
        // `available` stays sorted, so the first minimum is the lowest index.
        pairing.push(available.remove(best.1));
    }
    Ok(pairing)
}

/// `α X + (1 - α) S_p`, with the endpoints returned exactly.
pub fn mix(original: &Matrix, paired: &Matrix, alpha: f64) -> Result<Matrix> {
    check_alpha(alpha)?;
    if original.shape() != paired.shape() {
        return Err(Error::ShapeMismatch {
            expected: original.shape(),
            found: paired.shape(),
        });
    }
    if alpha == 1.0 {
        return Ok(original.clone());
    }
    if alpha == 0.0 {
        return Ok(paired.clone());
    }
    let data = original
        .as_slice()
        .iter()
        .zip(paired.as_slice())
        .map(|(x, s)| alpha * x + (1.0 - alpha) * s)
        .collect();
    Matrix::new(original.rows(), original.cols(), data)
}

/// Largest α whose uniform-case LID bound equals `budget_percent`.
pub fn solve_alpha_for_budget(budget_percent: f64, eta: f64, d: usize, range_width: f64) -> Result<f64> {
    solve_alpha_detailed(budget_percent, eta, d, range_width).map(|(a, _)| a)
}

fn solve_alpha_detailed(
    budget_percent: f64,
    eta: f64,
    d: usize,
    range_width: f64,
) -> Result<(f64, bool)> {
    check_budget(budget_percent)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param("eta", eta, "must be positive"));
    }
    if d < 1 {
        return Err(Error::param("d", d as f64, "need at least one dimension"));
    }
    if !(range_width > 0.0 && range_width.is_finite()) {
        return Err(Error::param("rangeWidth", range_width, "must be positive"));
    }
    if budget_percent == 100.0 {
        // Every record breaching is always within budget.
        return Ok((1.0 - f64::EPSILON / 2.0, false));
    }
    // 1 - (1 - B)^(1/d), evaluated without cancellation for small B.
    let per_dim = -((-budget_percent / 100.0).ln_1p() / d as f64).exp_m1();
    if !(per_dim > 0.0) {
        return Err(Error::param(
            "lidBudget",
            budget_percent,
            "too small to resolve numerically",
        ));
    }
    let alpha = 1.0 - 2.0 * eta / (range_width * per_dim);
    if alpha < 0.0 {
        warn!("LID budget {budget_percent}% is unreachable even at alpha = 0; using alpha = 0");
        return Ok((0.0, true));
    }
    Ok((alpha.min(1.0 - f64::EPSILON / 2.0), false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::lid_bound;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_rows(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(
            nearest_pairing(&col(&[0.0, 10.0]), &col(&[9.0, 1.0])).unwrap(),
            vec![1, 0]
        );
        assert_eq!(nearest_pairing(&col(&[3.0]), &col(&[-4.0])).unwrap(), vec![0]);
        let m = col(&[0.3, 0.1, 0.9, 0.5]);
        assert_eq!(nearest_pairing(&m, &m).unwrap(), vec![0, 1, 2, 3]);
        // Ties go to the lowest synthetic index.
        assert_eq!(nearest_pairing(&col(&[0.0, 0.0]), &col(&[1.0, -1.0])).unwrap(), vec![0, 1]);
        assert!(nearest_pairing(&col(&[0.0]), &col(&[0.0, 1.0])).is_err());
    }

    // Brute-force oracle: literal transcription of the greedy rule with a
    // used-flag array and a full scan.
    fn pairing_oracle(x: &Matrix, s: &Matrix) -> Vec<usize> {
        let n = x.rows();
        let mut used = vec![false; n];
        (0..n)
            .map(|i| {
                let mut best: Option<(f64, usize)> = None;
                for k in 0..n {
                    if used[k] {
                        continue;
                    }
                    let d = (0..x.cols()).map(|j| (x[(i, j)] - s[(k, j)]).powi(2)).sum::<f64>().sqrt();
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, k));
                    }
                }
                let k = best.unwrap().1;
                used[k] = true;
                k
            })
            .collect()
    }

    #[test]
    fn mix_endpoints_and_midpoint() {
        let x = col(&[0.2, 0.7]);
        let s = col(&[0.6, 0.1]);
        assert_eq!(mix(&x, &s, 1.0).unwrap(), x);
        assert_eq!(mix(&x, &s, 0.0).unwrap(), s);
        assert!((mix(&x, &s, 0.5).unwrap()[(0, 0)] - 0.4).abs() < 1e-15);
        assert!(mix(&x, &s, 1.1).is_err());
        assert!(mix(&x, &s, -0.1).is_err());
    }

    #[test]
    fn solver_examples() {
        let a = solve_alpha_for_budget(10.0, 0.001, 3, 1.0).unwrap();
        assert!((a - 0.942_04).abs() < 1e-5, "alpha = {a}");
        assert!((lid_bound(a, 0.001, 3, 1.0).unwrap() - 10.0).abs() < 1e-6);
        let a = solve_alpha_for_budget(0.025, 0.0001, 1, 1.0).unwrap();
        assert!((a - 0.2).abs() < 1e-12);
        let a = solve_alpha_for_budget(100.0, 0.3, 4, 1.0).unwrap();
        assert!(a < 1.0 && a > 1.0 - 1e-15);
        assert_eq!(solve_alpha_for_budget(1.0, 0.4, 1, 1.0).unwrap(), 0.0);
        assert!(solve_alpha_for_budget(0.0, 0.1, 1, 1.0).is_err());
        assert!(solve_alpha_for_budget(101.0, 0.1, 1, 1.0).is_err());
    }

    #[test]
    fn budget_config_uses_min_range() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.5]]).unwrap();
        let cfg = HybridConfig::LidBudget {
            budget_percent: 10.0,
            range_width: None,
        };
        let r = cfg.resolve(&x, 0.001).unwrap();
        assert_eq!(r.range_width, Some(0.5));
        assert_eq!(r.alpha, solve_alpha_for_budget(10.0, 0.001, 2, 0.5).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pairing_is_a_permutation_matching_the_oracle(n in 1usize..40, d in 1usize..4, seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Matrix::from_fn(n, d, |_, _| rng.random::<f64>());
            let s = Matrix::from_fn(n, d, |_, _| rng.random::<f64>());
            let p = nearest_pairing(&x, &s).unwrap();
            let mut sorted = p.clone();
            sorted.sort();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(p, pairing_oracle(&x, &s));
        }

        #[test]
        fn bound_round_trip(b in 0.01f64..99.9, eta in 1e-5f64..1e-2, d in 1usize..8, w in 0.5f64..5.0) {
            let a = solve_alpha_for_budget(b, eta, d, w).unwrap();
            if a > 0.0 {
                prop_assert!((lid_bound(a, eta, d, w).unwrap() - b).abs() < 1e-9);
            }
        }
    }
}
