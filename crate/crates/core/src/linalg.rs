//! Dense symmetric linear algebra: covariance estimation and Cholesky.

use crate::dataset::Matrix;

/// Column means.
pub fn column_means(m: &Matrix) -> Vec<f64> {
    let n = m.rows() as f64;
    let mut mu = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        for (acc, v) in mu.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mu.iter_mut().for_each(|v| *v /= n);
    mu
}

/// Covariance matrix with divisor `n` (population form).
pub fn covariance(m: &Matrix) -> Matrix {
    let d = m.cols();
    let mu = column_means(m);
    let mut c = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in m.iter_rows() {
        for j in 0..d {
            centered[j] = row[j] - mu[j];
        }
        for j in 0..d {
            let cj = centered[j];
            for k in 0..=j {
                c[(j, k)] += cj * centered[k];
            }
        }
    }
    let n = m.rows() as f64;
    for j in 0..d {
        for k in 0..=j {
            let v = c[(j, k)] / n;
            c[(j, k)] = v;
            c[(k, j)] = v;
        }
    }
    c
}

/// Rescales a covariance matrix to unit diagonal. Zero-variance columns get a
/// unit diagonal and zero off-diagonals.
pub fn correlation_from_covariance(cov: &Matrix) -> Matrix {
    let d = cov.rows();
    let sd: Vec<f64> = (0..d).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    Matrix::from_fn(d, d, |j, k| {
        if j == k {
            1.0
        } else if sd[j] > 0.0 && sd[k] > 0.0 {
            cov[(j, k)] / (sd[j] * sd[k])
        } else {
            0.0
        }
    })
}

/// A pivot that fell at or below the acceptance threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFailure {
    pub index: usize,
    pub pivot: f64,
}

const BLOCK: usize = 96;

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
///
/// Only the lower triangle of `a` is read. Factorization stops at the first
/// pivot (the value under the square root) that is `<= min_pivot`.
pub fn cholesky(a: &Matrix, min_pivot: f64) -> Result<Matrix, PivotFailure> {
    assert_eq!(a.rows(), a.cols(), "cholesky needs a square matrix");
    let n = a.rows();
    let mut l = a.clone();
    let buf = l.as_mut_slice();
    let mut k = 0;
    while k < n {
        let kb = BLOCK.min(n - k);
        factor_diagonal_block(buf, n, k, kb, min_pivot)?;
        solve_panel(buf, n, k, kb);
        update_trailing(buf, n, k, kb);
        k += kb;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            buf[i * n + j] = 0.0;
        }
    }
    Ok(l)
}

fn factor_diagonal_block(
    a: &mut [f64],
    n: usize,
    k: usize,
    kb: usize,
    min_pivot: f64,
) -> Result<(), PivotFailure> {
    for i in k..k + kb {
        for j in k..=i {
            let s = a[i * n + j] - dot(&a[i * n + k..i * n + j], &a[j * n + k..j * n + j]);
            if i == j {
                if !(s > min_pivot) {
                    return Err(PivotFailure { index: i, pivot: s });
                }
                a[i * n + i] = s.sqrt();
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    Ok(())
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for t in 0..4 {
            acc[t] += x[t] * y[t];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

// L21 <- A21 L11^-T in strips of SUB columns: a scalar solve inside each strip,
// then a GEMM update of the columns to its right.
fn solve_panel(a: &mut [f64], n: usize, k: usize, kb: usize) {
    const SUB: usize = 16;
    let start = k + kb;
    if start >= n {
        return;
    }
    let mut j0 = k;
    while j0 < start {
        let jb = SUB.min(start - j0);
        for i in start..n {
            for j in j0..j0 + jb {
                let s = a[i * n + j] - dot(&a[i * n + j0..i * n + j], &a[j * n + j0..j * n + j]);
                a[i * n + j] = s / a[j * n + j];
            }
        }
        let rest = start - (j0 + jb);
        if rest > 0 {
            let p = a.as_mut_ptr();
            // SAFETY: reads rows start.. at columns j0..j0+jb and rows
            // j0+jb..start of the diagonal block; writes rows start.. at
            // columns j0+jb..start. The regions are disjoint and in bounds.
            unsafe {
                matrixmultiply::dgemm(
                    n - start,
                    jb,
                    rest,
                    -1.0,
                    p.add(start * n + j0),
                    n as isize,
                    1,
                    p.add((j0 + jb) * n + j0),
                    1,
                    n as isize,
                    1.0,
                    p.add(start * n + j0 + jb),
                    n as isize,
                    1,
                );
            }
        }
        j0 += jb;
    }
}

// A22 -= L21 L21ᵀ, lower triangle only, one block row at a time.
fn update_trailing(a: &mut [f64], n: usize, k: usize, kb: usize) {
    let start = k + kb;
    let mut r = start;
    while r < n {
        let rb = BLOCK.min(n - r);
        let width = r + rb - start;
        let p = a.as_mut_ptr();
        // SAFETY: the operands live in one allocation but are disjoint: the
        // panel reads columns k..k+kb, the output writes columns start.., and
        // all indices stay below n*n.
        unsafe {
            matrixmultiply::dgemm(
                rb,
                kb,
                width,
                -1.0,
                p.add(r * n + k),
                n as isize,
                1,
                p.add(start * n + k),
                1,
                n as isize,
                1.0,
                p.add(r * n + start),
                n as isize,
                1,
            );
        }
        r += rb;
    }
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let row = l.row(i);
        let s: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
        x[i] = (x[i] - s) / row[i];
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        x[i] /= l[(i, i)];
        let xi = x[i];
        let row = l.row(i);
        for j in 0..i {
            x[j] -= row[j] * xi;
        }
    }
    x
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// Inverse of a lower-triangular matrix.
pub fn invert_lower(l: &Matrix) -> Matrix {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = solve_lower(l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv
}

pub fn trace(m: &Matrix) -> f64 {
    (0..m.rows().min(m.cols())).map(|i| m[(i, i)]).sum()
}
