//! Verification fixture with analytic asymptotics:
//! F(x) = F★ + ½(x−x★)ᵀH(x−x★), gradient oracle g(x,ξ) = H(x−x★) + w with
//! w ~ N(0,Γ), Hessian oracle H plus an optional symmetric Gaussian
//! perturbation. Unbiasedness and constant conditional covariance hold
//! exactly, so every assumption of the CLT analysis is met by construction.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{GradientSample, GroundTruth, Problem, Result};
use crate::linalg::{dot, vec_sub};
use crate::Matrix64;

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    gt: GroundTruth,
    /// Cholesky factor of Γ, absent when Γ = 0 (noiseless).
    noise_factor: Option<Matrix64>,
    /// Standard deviation of the symmetric perturbation added to Hessian
    /// draws; 0 gives the exact-Hessian oracle.
    hessian_noise: f64,
}

impl QuadraticProblem {
    pub fn new(gt: GroundTruth) -> Result<Self> {
        let noise_factor = if gt.gamma.frobenius_norm() == 0.0 {
            None
        } else {
            Some(psd_factor(&gt.gamma)?)
        };
        Ok(Self {
            gt,
            noise_factor,
            hessian_noise: 0.0,
        })
    }

    pub fn with_hessian_noise(mut self, std_dev: f64) -> Self {
        self.hessian_noise = std_dev;
        self
    }

    pub fn ground_truth_ref(&self) -> &GroundTruth {
        &self.gt
    }
}

/// Factor M = L Lᵀ for a symmetric PSD matrix via its eigendecomposition
/// (L = V diag(√λ)), tolerating zero eigenvalues.
fn psd_factor(m: &Matrix64) -> Result<Matrix64> {
    let e = crate::linalg::sym_eigen(m)?;
    let n = m.rows();
    let mut l = Matrix64::zeros(n, n);
    for k in 0..n {
        let s = e.values[k].max(0.0).sqrt();
        for i in 0..n {
            l[(i, k)] = e.vectors[(i, k)] * s;
        }
    }
    Ok(l)
}

impl Problem for QuadraticProblem {
    fn dim(&self) -> usize {
        self.gt.dim()
    }

    fn loss(&self, x: &[f64]) -> f64 {
        let diff = vec_sub(x, &self.gt.x_star);
        let hd = self.gt.h.matvec(&diff).expect("dimension checked");
        self.gt.f_star + 0.5 * dot(&diff, &hd)
    }

    fn gradient_sample(&self, x: &[f64], rng: &mut dyn RngCore) -> GradientSample {
        let diff = vec_sub(x, &self.gt.x_star);
        let mut g = self.gt.h.matvec(&diff).expect("dimension checked");
        if let Some(l) = &self.noise_factor {
            let z: Vec<f64> = (0..g.len()).map(|_| StandardNormal.sample(rng)).collect();
            let w = l.matvec(&z).expect("dimension checked");
            for (gi, wi) in g.iter_mut().zip(&w) {
                *gi += wi;
            }
        }
        GradientSample {
            value: g,
            batch_indices: None,
        }
    }

    fn hessian_sample(
        &self,
        _x: &[f64],
        _batch: Option<&[usize]>,
        rng: &mut dyn RngCore,
    ) -> Matrix64 {
        let mut h = self.gt.h.clone();
        if self.hessian_noise > 0.0 {
            let d = h.rows();
            for i in 0..d {
                for j in i..d {
                    let z: f64 = StandardNormal.sample(rng);
                    let v = self.hessian_noise * z;
                    h[(i, j)] += v;
                    if j != i {
                        h[(j, i)] += v;
                    }
                }
            }
        }
        h
    }

    fn ground_truth(&self) -> Option<&GroundTruth> {
        Some(&self.gt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn problem(h: Matrix64, gamma: Matrix64, x_star: Vec<f64>) -> QuadraticProblem {
        let gt = GroundTruth::new(x_star, h, gamma, 0.0).unwrap();
        QuadraticProblem::new(gt).unwrap()
    }

    #[test]
    fn gradient_vanishes_at_minimizer_in_expectation() {
        let p = problem(Matrix64::identity(3), Matrix64::identity(3), vec![0.0; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mean = vec![0.0; 3];
        let n = 20_000;
        for _ in 0..n {
            let g = p.gradient_sample(&[0.0; 3], &mut rng);
            for (m, v) in mean.iter_mut().zip(&g.value) {
                *m += v / n as f64;
            }
        }
        assert!(norm2(&mean) < 4.0 * (3.0 / n as f64).sqrt());
    }

    #[test]
    fn noiseless_gradient_is_exact() {
        let p = problem(Matrix64::diagonal(&[2.0, 1.0]), Matrix64::zeros(2, 2), vec![0.0; 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = p.gradient_sample(&[1.0, 1.0], &mut rng);
        assert_eq!(g.value, vec![2.0, 1.0]);
    }

    #[test]
    fn monte_carlo_mean_matches_true_gradient() {
        // H = I, Γ = I, x★ = 0: E[g(e₁)] = e₁
        let d = 4;
        let p = problem(Matrix64::identity(d), Matrix64::identity(d), vec![0.0; d]);
        let mut x = vec![0.0; d];
        x[0] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut mean = vec![0.0; d];
        for _ in 0..n {
            let g = p.gradient_sample(&x, &mut rng);
            for (m, v) in mean.iter_mut().zip(&g.value) {
                *m += v / n as f64;
            }
        }
        let err = norm2(&vec_sub(&mean, &x));
        assert!(err <= 3.0 * (d as f64 / n as f64).sqrt(), "mean error {err}");
    }

    #[test]
    fn conditional_covariance_is_gamma() {
        let gamma = Matrix64::new(2, 2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let p = problem(Matrix64::identity(2), gamma.clone(), vec![0.0; 2]);
        let x = [0.3, -0.7];
        let exact = p.gt.h.matvec(&vec_sub(&x, &p.gt.x_star)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200_000;
        let mut cov = Matrix64::zeros(2, 2);
        for _ in 0..n {
            let g = p.gradient_sample(&x, &mut rng);
            let w = vec_sub(&g.value, &exact);
            for i in 0..2 {
                for j in 0..2 {
                    cov[(i, j)] += w[i] * w[j] / n as f64;
                }
            }
        }
        let err = cov.sub(&gamma).unwrap().frobenius_norm();
        assert!(err < 0.05 * gamma.frobenius_norm(), "covariance error {err}");
    }

    #[test]
    fn noisy_hessian_is_symmetric_and_unbiased_looking() {
        let p = problem(Matrix64::diagonal(&[2.0, 1.0]), Matrix64::identity(2), vec![0.0; 2])
            .with_hessian_noise(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut mean = Matrix64::zeros(2, 2);
        let n = 50_000;
        for _ in 0..n {
            let h = p.hessian_sample(&[0.0; 2], None, &mut rng);
            assert_eq!(h[(0, 1)], h[(1, 0)]);
            mean = mean.add(&h.scale(1.0 / n as f64)).unwrap();
        }
        let err = mean.sub(&p.gt.h).unwrap().frobenius_norm();
        assert!(err < 0.02, "Hessian mean error {err}");
    }
}
