//! Kernel ridge regression and the Nadaraya–Watson estimator, with k-fold
//! cross-validation of their smoothing parameters.

use log::{debug, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Radial kernel on Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kernel {
    /// `(1 - r)^4 (4r + 1)` on `r <= 1`, zero beyond.
    Wendland,
    /// `exp(-r² / (2 w²))`.
    Gaussian { width: f64 },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Wendland
    }
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        if let Kernel::Gaussian { width } = *self {
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::param("kernel width", width, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Wendland => "wendland",
            Kernel::Gaussian { .. } => "gaussian",
        }
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Kernel::Wendland => wendland(r),
            Kernel::Gaussian { width } => (-r * r / (2.0 * width * width)).exp(),
        }
    }

    pub fn between(&self, a: &[f64], b: &[f64]) -> f64 {
        self.eval(distance(a, b))
    }
}

#[inline]
fn wendland(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        let t = 1.0 - r;
        let t2 = t * t;
        t2 * t2 * (4.0 * r + 1.0)
    }
}

/// Wendland kernel value at distance `r`.
pub fn wendland_kernel(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::param("distance", r, "must be non-negative"));
    }
    Ok(wendland(r))
}

#[inline]
fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn distance(a: &[f64], b: &[f64]) -> f64 {
    sq_distance(a, b).sqrt()
}

/// `K_ij = k(a_i, b_j)`.
pub fn gram(a: &Matrix, b: &Matrix, kernel: Kernel) -> Matrix {
    Matrix::from_fn(a.rows(), b.rows(), |i, j| kernel.between(a.row(i), b.row(j)))
}

fn symmetric_gram(x: &Matrix, kernel: Kernel) -> Matrix {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.between(x.row(i), x.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Regularization grid and fold count for CV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CvGrid {
    pub lambda_values: Vec<f64>,
    pub folds: usize,
}

impl Default for CvGrid {
    /// `{0, 0.0002, ..., 0.002}` with 5 folds.
    fn default() -> Self {
        Self {
            lambda_values: (0..=10).map(|k| k as f64 * 0.0002).collect(),
            folds: 5,
        }
    }
}

impl CvGrid {
    pub fn new(lambda_values: Vec<f64>, folds: usize) -> Result<Self> {
        let g = Self {
            lambda_values,
            folds,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_values.is_empty() {
            return Err(Error::Empty("lambda grid"));
        }
        if let Some(&bad) = self.lambda_values.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::param("lambda", bad, "must be non-negative"));
        }
        if self.folds < 2 {
            return Err(Error::param("folds", self.folds as f64, "need at least two folds"));
        }
        Ok(())
    }
}

/// Fitted kernel ridge regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrrModel {
    training_inputs: Matrix,
    coefficients: Vec<f64>,
    lambda: f64,
    kernel: Kernel,
}

impl KrrModel {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn training_inputs(&self) -> &Matrix {
        &self.training_inputs
    }

    /// `f(x) = Σ_j c_j k(x, x_j)` for each query row.
    pub fn predict(&self, queries: &Matrix) -> Result<Vec<f64>> {
        if queries.cols() != self.training_inputs.cols() {
            return Err(Error::ShapeMismatch {
                expected: (queries.rows(), self.training_inputs.cols()),
                found: queries.shape(),
            });
        }
        Ok(queries
            .iter_rows()
            .map(|q| {
                self.training_inputs
                    .iter_rows()
                    .zip(&self.coefficients)
                    .map(|(x, c)| c * self.kernel.between(q, x))
                    .sum()
            })
            .collect())
    }
}

fn has_duplicate_rows(x: &Matrix) -> bool {
    let mut idx: Vec<usize> = (0..x.rows()).collect();
    idx.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx.windows(2).any(|w| x.row(w[0]) == x.row(w[1]))
}

/// Solves `(K + nλI) c = y` by Cholesky. At λ = 0 a failed factorization is
/// retried once with a diagonal jitter of `1e-10 trace(K)/n`.
fn solve_regularized(k: &Matrix, y: &[f64], lambda: f64, inputs: &Matrix) -> Result<Vec<f64>> {
    let n = k.rows();
    let mut a = k.clone();
    let shift = n as f64 * lambda;
    for i in 0..n {
        a[(i, i)] += shift;
    }
    match linalg::cholesky(&a, 0.0) {
        Ok(l) => Ok(linalg::cholesky_solve(&l, y)),
        Err(f) if lambda == 0.0 => {
            if has_duplicate_rows(inputs) {
                return Err(Error::SingularSystem(
                    "duplicated input rows make the kernel matrix singular at lambda = 0; use lambda > 0"
                        .into(),
                ));
            }
            let jitter = 1e-10 * linalg::trace(k) / n as f64;
            warn!(
                "kernel matrix not positive definite (pivot {:e} at {}); retrying with jitter {jitter:e}",
                f.pivot, f.index
            );
            for i in 0..n {
                a[(i, i)] += jitter;
            }
            linalg::cholesky(&a, 0.0)
                .map(|l| linalg::cholesky_solve(&l, y))
                .map_err(|f| {
                    Error::SingularSystem(format!(
                        "factorization failed after jitter (pivot {:e} at {}); use lambda > 0",
                        f.pivot, f.index
                    ))
                })
        }
        Err(f) => Err(Error::SingularSystem(format!(
            "K + n*lambda*I is not positive definite (pivot {:e} at {}) for lambda = {lambda}",
            f.pivot, f.index
        ))),
    }
}

/// Fits kernel ridge regression on `data` with regularization `lambda`.
pub fn fit_krr(data: &Dataset, lambda: f64, kernel: Kernel) -> Result<KrrModel> {
    let y = data.require_response()?;
    fit_krr_xy(data.inputs(), y, lambda, kernel)
}

pub(crate) fn fit_krr_xy(x: &Matrix, y: &[f64], lambda: f64, kernel: Kernel) -> Result<KrrModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", lambda, "must be non-negative"));
    }
    kernel.validate()?;
    let k = symmetric_gram(x, kernel);
    if let Some((row, column)) = k.find_non_finite() {
        return Err(Error::NonFinite { row, column });
    }
    let coefficients = solve_regularized(&k, y, lambda, x)?;
    Ok(KrrModel {
        training_inputs: x.clone(),
        coefficients,
        lambda,
        kernel,
    })
}

pub fn predict_krr(model: &KrrModel, queries: &Matrix) -> Result<Vec<f64>> {
    model.predict(queries)
}

/// Seeded random partition: row `perm[i]` goes to fold `i % folds`.
fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::rng(seed));
    let mut fold = vec![0; n];
    for (i, &p) in perm.iter().enumerate() {
        fold[p] = i % folds;
    }
    fold
}

fn check_cv_size(n: usize, folds: usize) -> Result<()> {
    if n < folds {
        return Err(Error::TooFewSamples {
            needed: folds,
            found: n,
        });
    }
    Ok(())
}

fn mean_squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / a.len() as f64
}

/// λ minimizing the mean held-out MSE; ties go to the larger λ.
pub fn select_lambda(data: &Dataset, grid: &CvGrid, kernel: Kernel, seed: u64) -> Result<f64> {
    select_lambda_xy(data.inputs(), data.require_response()?, grid, kernel, seed)
}

pub(crate) fn select_lambda_xy(
    x: &Matrix,
    y: &[f64],
    grid: &CvGrid,
    kernel: Kernel,
    seed: u64,
) -> Result<f64> {
    grid.validate()?;
    kernel.validate()?;
    let n = x.rows();
    check_cv_size(n, grid.folds)?;
    let mut lambdas = grid.lambda_values.clone();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    lambdas.dedup();
    if lambdas.len() == 1 {
        return Ok(lambdas[0]);
    }

    let full = symmetric_gram(x, kernel);
    let fold = fold_assignment(n, grid.folds, seed);
    // Per fold: MSE for each λ (None when the fit failed).
    let per_fold: Vec<Vec<Option<f64>>> = (0..grid.folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
            let k_train = Matrix::from_fn(train.len(), train.len(), |a, b| full[(train[a], train[b])]);
            let x_train = x.select_rows(&train);
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            let k_cross = Matrix::from_fn(test.len(), train.len(), |a, b| full[(test[a], train[b])]);
            lambdas
                .iter()
                .map(|&lambda| {
                    let c = solve_regularized(&k_train, &y_train, lambda, &x_train).ok()?;
                    let pred: Vec<f64> = k_cross
                        .iter_rows()
                        .map(|row| row.iter().zip(&c).map(|(k, c)| k * c).sum())
                        .collect();
                    Some(mean_squared(&pred, &y_test))
                })
                .collect()
        })
        .collect();

    let mut best: Option<(f64, f64)> = None;
    for (li, &lambda) in lambdas.iter().enumerate() {
        let scores: Option<Vec<f64>> = per_fold.iter().map(|f| f[li]).collect();
        let Some(scores) = scores else {
            debug!("lambda {lambda}: skipped, fit failed in some fold");
            continue;
        };
        let mse = scores.iter().sum::<f64>() / scores.len() as f64;
        debug!("lambda {lambda}: cv mse {mse}");
        if best.map_or(true, |(b, _)| mse < b) {
            best = Some((mse, lambda));
        }
    }
    best.map(|(_, l)| l).ok_or_else(|| {
        Error::SingularSystem("every lambda in the grid failed to fit; add lambda > 0".into())
    })
}

/// Fits KRR with λ chosen by [`select_lambda`].
pub fn fit_krr_cv(data: &Dataset, grid: &CvGrid, kernel: Kernel, seed: u64) -> Result<KrrModel> {
    let lambda = select_lambda(data, grid, kernel, seed)?;
    fit_krr(data, lambda, kernel)
}

/// Nadaraya–Watson estimate with a Gaussian weight of bandwidth `h`.
pub fn nadaraya_watson(data: &Dataset, bandwidth: f64, queries: &Matrix) -> Result<Vec<f64>> {
    nadaraya_watson_xy(data.inputs(), data.require_response()?, bandwidth, queries)
}

pub(crate) fn nadaraya_watson_xy(x: &Matrix, y: &[f64], h: f64, queries: &Matrix) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("bandwidth", h, "must be positive"));
    }
    if queries.cols() != x.cols() {
        return Err(Error::ShapeMismatch {
            expected: (queries.rows(), x.cols()),
            found: queries.shape(),
        });
    }
    let scale = -0.5 / (h * h);
    Ok(queries
        .iter_rows()
        .map(|q| {
            let (mut num, mut den) = (0.0, 0.0);
            let mut nearest = (f64::INFINITY, 0);
            for (i, xi) in x.iter_rows().enumerate() {
                let d2 = sq_distance(q, xi);
                if d2 < nearest.0 {
                    nearest = (d2, i);
                }
                let w = (scale * d2).exp();
                num += w * y[i];
                den += w;
            }
            if den > 0.0 {
                num / den
            } else {
                y[nearest.1]
            }
        })
        .collect())
}

/// `{0.01 * 2^k : k = 0..10}`.
pub fn default_nw_bandwidth_grid() -> Vec<f64> {
    (0..=10).map(|k| 0.01 * f64::powi(2.0, k)).collect()
}

/// NW bandwidth minimizing held-out MSE; ties go to the larger bandwidth.
pub fn select_nw_bandwidth(data: &Dataset, grid: &[f64], folds: usize, seed: u64) -> Result<f64> {
    select_nw_bandwidth_xy(data.inputs(), data.require_response()?, grid, folds, seed)
}

pub(crate) fn select_nw_bandwidth_xy(
    x: &Matrix,
    y: &[f64],
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty("bandwidth grid"));
    }
    if folds < 2 {
        return Err(Error::param("folds", folds as f64, "need at least two folds"));
    }
    let n = x.rows();
    check_cv_size(n, folds)?;
    let fold = fold_assignment(n, folds, seed);
    let mut hs = grid.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    let mut best: Option<(f64, f64)> = None;
    for &h in &hs {
        let mut total = 0.0;
        for f in 0..folds {
            let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            let pred = nadaraya_watson_xy(&x.select_rows(&train), &y_train, h, &x.select_rows(&test))?;
            total += mean_squared(&pred, &y_test);
        }
        let mse = total / folds as f64;
        if best.map_or(true, |(b, _)| mse < b) {
            best = Some((mse, h));
        }
    }
    Ok(best.expect("grid is non-empty").1)
}
