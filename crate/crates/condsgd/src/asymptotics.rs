//! Closed-form asymptotic theory for (conditioned) SGD: the centering
//! constant κ, the Lyapunov equation determining the limiting covariance of
//! the rescaled iterates, the optimal covariance H⁻¹ΓH⁻¹, admissibility of
//! fixed conditioners, and the excess-risk limiting spectrum.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{kron, solve_linear, spd_inverse, sym_eigen, LinalgError, Matrix};
use crate::scalar::{real, Real};

/// Lyapunov solves go through a d²×d² Kronecker system; refuse above this.
pub const MAX_LYAPUNOV_DIM: usize = 50;

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("unstable Lyapunov operator: smallest eigenvalue of the symmetric part is {0:e}")]
    Unstable(f64),

    #[error("dimension {0} exceeds the Lyapunov solver limit {MAX_LYAPUNOV_DIM}")]
    TooLarge(usize),
}

pub type Result<T> = std::result::Result<T, AsymptoticsError>;

/// Limiting covariance Σ_C of √(1/α_k)(x_k − x★), with diagnostics.
#[derive(Debug, Clone)]
pub struct AsymptoticCovariance<R> {
    pub sigma: Matrix<R>,
    pub kappa: R,
    /// Frobenius norm of the Lyapunov defect K_κΣ + ΣK_κᵀ − D.
    pub residual: R,
    pub conditioner: Matrix<R>,
}

impl<R: Real> AsymptoticCovariance<R> {
    /// Summary record for JSON export: κ, residual, eigenvalues of Σ.
    pub fn summary(&self) -> Result<CovarianceSummary> {
        let eigen = sym_eigen(&self.sigma)?;
        Ok(CovarianceSummary {
            kappa: self.kappa.to_f64().unwrap_or(f64::NAN),
            residual: self.residual.to_f64().unwrap_or(f64::NAN),
            eigenvalues: eigen
                .values
                .iter()
                .map(|v| v.to_f64().unwrap_or(f64::NAN))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceSummary {
    pub kappa: f64,
    pub residual: f64,
    pub eigenvalues: Vec<f64>,
}

/// Centering constant for the schedule α_k = α k^{−β}: zero for β < 1 and
/// 1/(2α) for β = 1.
pub fn kappa<R: Real>(alpha: R, beta: R) -> R {
    if beta == R::one() {
        R::one() / (alpha + alpha)
    } else {
        R::zero()
    }
}

/// Solves K_κ Σ + Σ K_κᵀ = D for symmetric Σ via the d²×d² vectorized system
/// (I ⊗ K_κ + K_κ ⊗ I) vec(Σ) = vec(D).
///
/// Requires the symmetric part of K_κ to be positive definite, which
/// guarantees a unique solution.
pub fn solve_lyapunov<R: Real>(k_kappa: &Matrix<R>, d: &Matrix<R>) -> Result<Matrix<R>> {
    let n = k_kappa.rows();
    if n > MAX_LYAPUNOV_DIM {
        return Err(AsymptoticsError::TooLarge(n));
    }
    check_stable(k_kappa)?;
    let d = d.symmetrized(1e-12).map_err(AsymptoticsError::Linalg)?;

    let eye = Matrix::identity(n);
    let q = kron(&eye, k_kappa).add(&kron(k_kappa, &eye))?;
    // column-major vec
    let mut rhs = vec![R::zero(); n * n];
    for col in 0..n {
        for row in 0..n {
            rhs[col * n + row] = d[(row, col)];
        }
    }
    let v = solve_linear(&q, &rhs)?;
    let raw = Matrix::from_fn(n, n, |i, j| v[j * n + i]);
    let half = real::<R>(0.5);
    Ok(Matrix::from_fn(n, n, |i, j| {
        (raw[(i, j)] + raw[(j, i)]) * half
    }))
}

/// Frobenius norm of K Σ + Σ Kᵀ − D.
pub fn lyapunov_residual<R: Real>(
    k_kappa: &Matrix<R>,
    sigma: &Matrix<R>,
    d: &Matrix<R>,
) -> Result<R> {
    let lhs = k_kappa
        .matmul(sigma)?
        .add(&sigma.matmul(&k_kappa.transpose())?)?;
    Ok(lhs.sub(d)?.frobenius_norm())
}

fn check_stable<R: Real>(k: &Matrix<R>) -> Result<()> {
    let half = real::<R>(0.5);
    let sym = k.add(&k.transpose())?.scale(half);
    let min = sym_eigen(&sym)?.min();
    if min <= real::<R>(1e-10) {
        return Err(AsymptoticsError::Unstable(min.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

/// Limiting covariance of √(1/α_k)(x_k − x★) for conditioned SGD with fixed
/// conditioner C: solves (CH − κI)Σ + Σ((CH)ᵀ − κI) = CΓCᵀ.
///
/// For β = 1 the covariance of √k(x_k − x★) is α·Σ_C; the α factor is left
/// to the caller, matching the k^{β/2} scaling convention.
pub fn asymptotic_covariance<R: Real>(
    c: &Matrix<R>,
    h: &Matrix<R>,
    gamma: &Matrix<R>,
    alpha: R,
    beta: R,
) -> Result<AsymptoticCovariance<R>> {
    let kap = kappa(alpha, beta);
    let ch = c.matmul(h)?;
    let mut k_kappa = ch;
    for i in 0..k_kappa.rows() {
        k_kappa[(i, i)] -= kap;
    }
    let d = c.matmul(gamma)?.matmul(&c.transpose())?;
    let sigma = solve_lyapunov(&k_kappa, &d)?;
    let residual = lyapunov_residual(&k_kappa, &sigma, &d)?;
    Ok(AsymptoticCovariance {
        sigma,
        kappa: kap,
        residual,
        conditioner: c.clone(),
    })
}

/// The optimal limiting covariance H⁻¹ Γ H⁻¹, attained by C★ = H⁻¹.
pub fn optimal_covariance<R: Real>(h: &Matrix<R>, gamma: &Matrix<R>) -> Result<Matrix<R>> {
    let hinv = spd_inverse(h)?;
    Ok(hinv.matmul(gamma)?.matmul(&hinv)?)
}

/// Membership in 𝒞_H: C invertible with the symmetric part of CH − I/2
/// positive definite.
pub fn membership_c_h<R: Real>(c: &Matrix<R>, h: &Matrix<R>) -> Result<bool> {
    if c.rows() != h.rows() || c.cols() != h.cols() || !c.is_square() {
        return Err(AsymptoticsError::Linalg(LinalgError::Dimension(format!(
            "membership requires matching square matrices, got {}x{} and {}x{}",
            c.rows(),
            c.cols(),
            h.rows(),
            h.cols()
        ))));
    }
    let mut ch = c.matmul(h)?;
    let half = real::<R>(0.5);
    for i in 0..ch.rows() {
        ch[(i, i)] -= half;
    }
    let sym = ch.add(&ch.transpose())?.scale(half);
    if sym_eigen(&sym)?.min() <= R::zero() {
        return Ok(false);
    }
    // invertibility via LU on a unit basis column; singular C is rejected
    let e0 = {
        let mut v = vec![R::zero(); c.rows()];
        v[0] = R::one();
        v
    };
    match solve_linear(c, &e0) {
        Ok(_) => Ok(true),
        Err(LinalgError::Singular { .. }) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

/// Sorted eigenvalues of H^{−1/2} Γ H^{−1/2}, governing the limit law of
/// k(F(x_k) − F★).
pub fn excess_risk_spectrum<R: Real>(h: &Matrix<R>, gamma: &Matrix<R>) -> Result<Vec<R>> {
    let eh = sym_eigen(h)?;
    if eh.min() <= R::zero() {
        return Err(AsymptoticsError::Linalg(LinalgError::NotPositiveDefinite {
            pivot: eh.min().to_f64().unwrap_or(f64::NAN),
            index: 0,
        }));
    }
    let h_inv_sqrt = eh.apply(|l| R::one() / l.sqrt());
    let m = h_inv_sqrt.matmul(gamma)?.matmul(&h_inv_sqrt)?;
    Ok(sym_eigen(&m.symmetrized(1e-9)?)?.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    type M = Matrix<f64>;

    fn random_spd(n: usize, rng: &mut impl Rng) -> M {
        let r = M::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut spd = r.matmul(&r.transpose()).unwrap();
        for i in 0..n {
            spd[(i, i)] += 0.2;
        }
        spd
    }

    #[test]
    fn kappa_cases() {
        assert_eq!(kappa(1.0, 0.75), 0.0);
        assert_eq!(kappa(1.0, 1.0), 0.5);
        assert_eq!(kappa(2.0, 1.0), 0.25);
    }

    #[test]
    fn lyapunov_known_solutions() {
        let i = M::identity(3);
        // K = I, D = I → 2Σ = I
        let s = solve_lyapunov(&i, &i).unwrap();
        assert!(s.sub(&i.scale(0.5)).unwrap().frobenius_norm() < 1e-12);
        // K = I/2, D = I → Σ = I
        let s = solve_lyapunov(&i.scale(0.5), &i).unwrap();
        assert!(s.sub(&i).unwrap().frobenius_norm() < 1e-12);
        // decoupled scalar equations 2 k_i σ_i = 1
        let k = M::diagonal(&[1.0, 2.0]);
        let s = solve_lyapunov(&k, &M::identity(2)).unwrap();
        assert_relative_eq!(s[(0, 0)], 0.5, max_relative = 1e-12);
        assert_relative_eq!(s[(1, 1)], 0.25, max_relative = 1e-12);
    }

    #[test]
    fn lyapunov_rejects_unstable_and_oversized() {
        let k = M::diagonal(&[1.0, -0.5]);
        assert!(matches!(
            solve_lyapunov(&k, &M::identity(2)),
            Err(AsymptoticsError::Unstable(_))
        ));
        let big = M::identity(MAX_LYAPUNOV_DIM + 1);
        assert!(matches!(
            solve_lyapunov(&big, &big),
            Err(AsymptoticsError::TooLarge(_))
        ));
    }

    #[test]
    fn asymptotic_covariance_identity_case() {
        // C = H = Γ = I, α = 1, β = 1 → K_κ = I/2, Σ = I
        let i = M::identity(2);
        let ac = asymptotic_covariance(&i, &i, &i, 1.0, 1.0).unwrap();
        assert!(ac.sigma.sub(&i).unwrap().frobenius_norm() < 1e-10);
        assert_eq!(ac.kappa, 0.5);
    }

    #[test]
    fn optimal_choice_matches_lyapunov_route() {
        // C = H^{-1} gives Σ = H^{-1} Γ H^{-1}
        let h = M::diagonal(&[2.0, 1.0]);
        let gamma = M::identity(2);
        let c = spd_inverse(&h).unwrap();
        let ac = asymptotic_covariance(&c, &h, &gamma, 1.0, 1.0).unwrap();
        let direct = optimal_covariance(&h, &gamma).unwrap();
        assert!(ac.sigma.sub(&direct).unwrap().frobenius_norm() < 1e-9);
        assert_relative_eq!(direct[(0, 0)], 0.25);
        assert_relative_eq!(direct[(1, 1)], 1.0);
    }

    #[test]
    fn optimal_covariance_trivial_cases() {
        let gamma = M::diagonal(&[3.0, 1.0]);
        assert!(optimal_covariance(&M::identity(2), &gamma)
            .unwrap()
            .sub(&gamma)
            .unwrap()
            .frobenius_norm()
            .abs()
            < 1e-12);
        let quarter = optimal_covariance(&M::identity(2).scale(2.0), &M::identity(2)).unwrap();
        assert!(quarter.sub(&M::identity(2).scale(0.25)).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn membership_cases() {
        let h = M::diagonal(&[2.0, 1.0]);
        let hinv = spd_inverse(&h).unwrap();
        assert!(membership_c_h(&hinv, &h).unwrap());
        assert!(!membership_c_h(&M::zeros(2, 2), &h).unwrap());
        assert!(!membership_c_h(&M::identity(2).scale(0.4), &M::identity(2)).unwrap());
        assert!(membership_c_h(&M::identity(2), &M::zeros(3, 3)).is_err());
    }

    #[test]
    fn excess_risk_spectrum_cases() {
        let gamma = M::diagonal(&[3.0, 1.0]);
        let spec = excess_risk_spectrum(&M::identity(2), &gamma).unwrap();
        assert_relative_eq!(spec[0], 1.0, max_relative = 1e-10);
        assert_relative_eq!(spec[1], 3.0, max_relative = 1e-10);

        let h = M::diagonal(&[4.0, 1.0]);
        let spec = excess_risk_spectrum(&h, &h).unwrap();
        assert!(spec.iter().all(|&l| (l - 1.0).abs() < 1e-10));

        let spec = excess_risk_spectrum(&M::diagonal(&[4.0, 1.0]), &M::identity(2)).unwrap();
        assert_relative_eq!(spec[0], 0.25, max_relative = 1e-10);
        assert_relative_eq!(spec[1], 1.0, max_relative = 1e-10);
    }

    #[test]
    fn spectrum_orthogonal_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(2..=8);
            let h = random_spd(n, &mut rng);
            let gamma = random_spd(n, &mut rng);
            // orthogonal Q from the eigenvectors of a random symmetric matrix
            let q = crate::linalg::sym_eigen(&random_spd(n, &mut rng)).unwrap().vectors;
            let rot = |m: &M| q.matmul(m).unwrap().matmul(&q.transpose()).unwrap();
            let s1 = excess_risk_spectrum(&h, &gamma).unwrap();
            let s2 = excess_risk_spectrum(&rot(&h), &rot(&gamma)).unwrap();
            for (a, b) in s1.iter().zip(&s2) {
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn delta_identity_from_optimality_proof() {
        // (CH − I/2)Δ + Δ(CH − I/2)ᵀ = (C − H⁻¹)Γ(C − H⁻¹)ᵀ
        // with Δ = Σ_C − H⁻¹ΓH⁻¹
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let n = rng.gen_range(2..=6);
            let h = random_spd(n, &mut rng);
            let gamma = random_spd(n, &mut rng);
            let hinv = spd_inverse(&h).unwrap();
            // perturb H^{-1} until membership holds
            let mut eps = 0.5;
            let c = loop {
                let s = M::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                let cand = hinv.add(&s.matmul(&s.transpose()).unwrap().scale(eps)).unwrap();
                if membership_c_h(&cand, &h).unwrap() {
                    break cand;
                }
                eps *= 0.5;
            };
            let sigma_c = asymptotic_covariance(&c, &h, &gamma, 1.0, 1.0).unwrap().sigma;
            let delta = sigma_c.sub(&optimal_covariance(&h, &gamma).unwrap()).unwrap();
            let mut ch = c.matmul(&h).unwrap();
            for i in 0..n {
                ch[(i, i)] -= 0.5;
            }
            let lhs = ch.matmul(&delta).unwrap().add(&delta.matmul(&ch.transpose()).unwrap()).unwrap();
            let cm = c.sub(&hinv).unwrap();
            let rhs = cm.matmul(&gamma).unwrap().matmul(&cm.transpose()).unwrap();
            let err = lhs.sub(&rhs).unwrap().frobenius_norm();
            assert!(err <= 1e-8 * rhs.frobenius_norm().max(1.0), "identity defect {err}");
        }
    }
}
