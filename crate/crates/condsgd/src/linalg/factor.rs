//! SPD inversion via Cholesky and general solves via partial-pivot LU.

use super::{LinalgError, Matrix, Result};
use crate::scalar::{real, Real};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<R: Real>(m: &Matrix<R>) -> Result<Matrix<R>> {
    let a = m.symmetrized(1e-12)?;
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= R::zero() {
                    return Err(LinalgError::NotPositiveDefinite {
                        pivot: sum.to_f64().unwrap_or(f64::NAN),
                        index: i,
                    });
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive definite matrix through its Cholesky
/// factorization; the result is exactly symmetric.
pub fn spd_inverse<R: Real>(m: &Matrix<R>) -> Result<Matrix<R>> {
    let l = cholesky(m)?;
    let n = l.rows();
    // invert the lower-triangular factor by forward substitution
    let mut linv = Matrix::zeros(n, n);
    for j in 0..n {
        linv[(j, j)] = R::one() / l[(j, j)];
        for i in (j + 1)..n {
            let mut sum = R::zero();
            for k in j..i {
                sum -= l[(i, k)] * linv[(k, j)];
            }
            linv[(i, j)] = sum / l[(i, i)];
        }
    }
    // M^{-1} = L^{-T} L^{-1}
    let mut inv = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = R::zero();
            for k in i.max(j)..n {
                sum += linv[(k, i)] * linv[(k, j)];
            }
            inv[(i, j)] = sum;
            inv[(j, i)] = sum;
        }
    }
    Ok(inv)
}

/// Solves A x = b by LU factorization with partial pivoting.
///
/// Singularity threshold: pivot magnitude below 1e-12 · max|entry|.
pub fn solve_linear<R: Real>(a: &Matrix<R>, b: &[R]) -> Result<Vec<R>> {
    if !a.is_square() {
        return Err(LinalgError::Dimension(format!(
            "solve requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if b.len() != n {
        return Err(LinalgError::Dimension(format!(
            "rhs length {} does not match dimension {n}",
            b.len()
        )));
    }
    let mut lu = a.clone();
    let mut x = b.to_vec();
    let threshold = a.max_abs() * real::<R>(1e-12);

    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if pivot_mag <= threshold {
            return Err(LinalgError::Singular {
                pivot: pivot_mag.to_f64().unwrap_or(f64::NAN),
                column: col,
            });
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = tmp;
            }
            x.swap(col, pivot_row);
        }
        let pivot = lu[(col, col)];
        for r in (col + 1)..n {
            let factor = lu[(r, col)] / pivot;
            if factor == R::zero() {
                continue;
            }
            lu[(r, col)] = R::zero();
            for j in (col + 1)..n {
                let v = lu[(col, j)];
                lu[(r, j)] -= factor * v;
            }
            let xc = x[col];
            x[r] -= factor * xc;
        }
    }
    // back substitution
    for row in (0..n).rev() {
        let mut sum = x[row];
        for j in (row + 1)..n {
            sum -= lu[(row, j)] * x[j];
        }
        x[row] = sum / lu[(row, row)];
    }
    Ok(x)
}
