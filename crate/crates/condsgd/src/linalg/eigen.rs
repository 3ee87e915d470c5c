//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use super::{LinalgError, Matrix, Result};
use crate::scalar::{real, Real};

/// Eigendecomposition of a symmetric matrix: M = V diag(λ) Vᵀ with
/// eigenvalues sorted ascending and eigenvectors as columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen<R> {
    pub values: Vec<R>,
    pub vectors: Matrix<R>,
}

impl<R: Real> SymEigen<R> {
    pub fn min(&self) -> R {
        self.values[0]
    }

    pub fn max(&self) -> R {
        *self.values.last().unwrap()
    }

    /// Rebuilds V f(diag(λ)) Vᵀ for a scalar function of the eigenvalues.
    pub fn apply(&self, f: impl Fn(R) -> R) -> Matrix<R> {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == R::zero() {
                continue;
            }
            for i in 0..n {
                let vi = self.vectors[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix<R> {
        self.apply(|l| l)
    }
}

/// Eigendecomposition of a symmetric matrix via cyclic Jacobi sweeps.
///
/// The input must be symmetric within 1e-12 relative tolerance; it is
/// symmetrized before the sweeps. Convergence: off-diagonal Frobenius norm
/// below 1e-12·‖M‖_F (floored at a few ulps for f32).
pub fn sym_eigen<R: Real>(m: &Matrix<R>) -> Result<SymEigen<R>> {
    let n = m.rows();
    if !m.is_square() {
        return Err(LinalgError::Dimension(format!(
            "eigendecomposition requires a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let mut a = m.symmetrized(1e-12)?;
    let mut v = Matrix::identity(n);
    if n <= 1 {
        return Ok(SymEigen {
            values: (0..n).map(|i| a[(i, i)]).collect(),
            vectors: v,
        });
    }

    let norm = a.frobenius_norm();
    let tol = norm * real::<R>(1e-12).max(R::epsilon() * real::<R>(16.0));
    let half = real::<R>(0.5);

    for _sweep in 0..100 {
        let mut off = R::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if (off + off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == R::zero() {
                    continue;
                }
                // rotation annihilating a[p][q]
                let theta = (a[(q, q)] - a[(p, p)]) * half / apq;
                let t = {
                    let sign = if theta >= R::zero() { R::one() } else { -R::one() };
                    sign / (theta.abs() + (theta * theta + R::one()).sqrt())
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = c * aip - s * aiq;
                    a[(i, q)] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = c * apj - s * aqj;
                    a[(q, j)] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let values: Vec<R> = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymEigen { values, vectors })
}

/// PSD ordering test: A ⪯ B iff λ_min(B − A) ≥ −tol.
pub fn psd_order<R: Real>(a: &Matrix<R>, b: &Matrix<R>, tol: R) -> Result<bool> {
    let diff = b.sub(a)?;
    Ok(sym_eigen(&diff)?.min() >= -tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(n: usize, data: &[f64]) -> Matrix<f64> {
        Matrix::new(n, n, data.to_vec()).unwrap()
    }

    fn random_symmetric(n: usize, rng: &mut impl Rng) -> Matrix<f64> {
        let raw = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        raw.add(&raw.transpose()).unwrap().scale(0.5)
    }

    pub(crate) fn random_spd(n: usize, rng: &mut impl Rng) -> Matrix<f64> {
        let r = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut spd = r.matmul(&r.transpose()).unwrap();
        for i in 0..n {
            spd[(i, i)] += 0.1;
        }
        spd
    }

    #[test]
    fn identity_and_diagonal() {
        let e = sym_eigen(&Matrix::<f64>::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);

        let e = sym_eigen(&Matrix::diagonal(&[2.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0]);
    }

    #[test]
    fn two_by_two_by_hand() {
        // [[2,1],[1,2]] has characteristic polynomial (2-λ)^2 - 1, roots 1 and 3
        let e = sym_eigen(&m(2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert_relative_eq!(e.values[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(e.values[1], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn rejects_asymmetric_and_nonsquare() {
        assert!(sym_eigen(&m(2, &[1.0, 2.0, 0.0, 1.0])).is_err());
        assert!(sym_eigen(&Matrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn psd_order_cases() {
        let i = Matrix::<f64>::identity(2);
        let two_i = i.scale(2.0);
        assert!(psd_order(&i, &two_i, 1e-10).unwrap());
        assert!(!psd_order(&two_i, &i, 1e-10).unwrap());
        // indefinite difference: eigenvalues (1, -1)
        let a = Matrix::diagonal(&[1.0, 3.0]);
        let b = Matrix::diagonal(&[2.0, 2.0]);
        assert!(!psd_order(&a, &b, 1e-10).unwrap());
    }

    #[test]
    fn product_eigenvalue_bounds() {
        // for SPD A, B every eigenvalue of AB lies in
        // [λ_min(A)λ_min(B), λ_max(A)λ_max(B)]
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let n = rng.gen_range(2..=10);
            let a = random_spd(n, &mut rng);
            let b = random_spd(n, &mut rng);
            let ea = sym_eigen(&a).unwrap();
            let eb = sym_eigen(&b).unwrap();
            // AB is similar to B^{1/2} A B^{1/2}, which is symmetric
            let sqrt_b = eb.apply(|l| l.sqrt());
            let sym_prod = sqrt_b.matmul(&a).unwrap().matmul(&sqrt_b).unwrap();
            let ep = sym_eigen(&sym_prod).unwrap();
            let lo = ea.min() * eb.min();
            let hi = ea.max() * eb.max();
            assert!(ep.min() >= lo - 1e-9, "min {} below {}", ep.min(), lo);
            assert!(ep.max() <= hi + 1e-9, "max {} above {}", ep.max(), hi);
        }
    }

    proptest! {
        #[test]
        fn reconstruction_and_orthogonality(seed in 0u64..500, n in 1usize..=20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sym = random_symmetric(n, &mut rng);
            let e = sym_eigen(&sym).unwrap();
            let norm = sym.frobenius_norm().max(1.0);
            let rec_err = e.reconstruct().sub(&sym).unwrap().frobenius_norm();
            prop_assert!(rec_err <= 1e-10 * norm);
            let vtv = e.vectors.transpose().matmul(&e.vectors).unwrap();
            let orth_err = vtv.sub(&Matrix::identity(n)).unwrap().frobenius_norm();
            prop_assert!(orth_err <= 1e-10);
            for w in e.values.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }

        #[test]
        fn kron_mixed_product(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (p, q, r) = (rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..4));
            let gen = |rows, cols, rng: &mut ChaCha8Rng| {
                Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0f64))
            };
            let a = gen(p, q, &mut rng);
            let c = gen(q, r, &mut rng);
            let b = gen(q, p, &mut rng);
            let d = gen(p, q, &mut rng);
            let lhs = kron(&a, &b).matmul(&kron(&c, &d)).unwrap();
            let rhs = kron(&a.matmul(&c).unwrap(), &b.matmul(&d).unwrap());
            let err = lhs.sub(&rhs).unwrap().frobenius_norm();
            prop_assert!(err <= 1e-10 * rhs.frobenius_norm().max(1.0));
        }
    }
}
