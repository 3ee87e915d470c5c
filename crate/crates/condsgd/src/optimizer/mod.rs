//! The iterative core: plain SGD, conditioned SGD with mixture
//! regularization C_k = (Φ_k + γ_{k+1}⁻¹I)⁻¹, weighted averaging of past
//! Hessian estimates, and the Polyak-averaging baseline.

mod history;
mod run;

pub use history::{weighted_phi, HessianHistory};
pub use run::{run, run_conditioned, run_sgd, Conditioning, RunOptions, Trajectory, TrajectoryRecord};

use thiserror::Error;

use crate::linalg::{axpy, sym_eigen, LinalgError, Matrix};
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("beta must lie in (1/2, 1], got {0}")]
    InvalidBeta(f64),

    #[error("alpha must be positive, got {0}")]
    InvalidAlpha(f64),

    #[error("gamma rule constant must be positive, got {0}")]
    InvalidGamma(f64),

    #[error("Hessian history is empty")]
    EmptyHistory,

    #[error("iterate diverged at step {step} (‖x‖ = {norm:e}); last valid state retained")]
    Divergence { step: usize, norm: f64 },
}

pub type Result<T> = std::result::Result<T, OptimizerError>;

/// Eigenvalue-cap rule for the mixture regularization. Both shipped rules
/// satisfy Σ(γ_k/k)² < ∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaRule {
    /// γ_k = √k, the experimental default.
    SqrtK,
    /// γ_k = c for all k.
    Constant(f64),
}

/// Weighting of past Hessian estimates in Φ_k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// ν_{j,k} = 1/(k+1); stored as an O(d²) running mean.
    Equal,
    /// ν_{j,k} ∝ exp(−η‖x_j − x_k‖₁), renormalized every step.
    Adaptive,
}

/// Learning-rate and conditioning schedule: α_k = α k^{−β}, the γ cap rule,
/// the adaptive-weight temperature η, and the weighting mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_rule: GammaRule,
    pub eta: f64,
    pub weighting: Weighting,
}

impl Schedule {
    pub fn new(alpha: f64, beta: f64, gamma_rule: GammaRule, eta: f64, weighting: Weighting) -> Result<Self> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(OptimizerError::InvalidAlpha(alpha));
        }
        if !(beta > 0.5 && beta <= 1.0) {
            return Err(OptimizerError::InvalidBeta(beta));
        }
        if let GammaRule::Constant(c) = gamma_rule {
            if c.is_nan() || c <= 0.0 {
                return Err(OptimizerError::InvalidGamma(c));
            }
        }
        Ok(Self {
            alpha,
            beta,
            gamma_rule,
            eta,
            weighting,
        })
    }

    /// The experimental defaults: α_k = 1/k, γ_k = √k, η = 10, adaptive
    /// weights.
    pub fn default_adaptive() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma_rule: GammaRule::SqrtK,
            eta: 10.0,
            weighting: Weighting::Adaptive,
        }
    }

    pub fn default_equal() -> Self {
        Self {
            weighting: Weighting::Equal,
            ..Self::default_adaptive()
        }
    }
}

/// α_k = α·k^{−β} for k ≥ 1.
pub fn learning_rate(k: usize, s: &Schedule) -> f64 {
    debug_assert!(k >= 1);
    s.alpha * (k as f64).powf(-s.beta)
}

/// Eigenvalue cap γ_k for k ≥ 1.
pub fn gamma_cap(k: usize, s: &Schedule) -> f64 {
    debug_assert!(k >= 1);
    match s.gamma_rule {
        GammaRule::SqrtK => (k as f64).sqrt(),
        GammaRule::Constant(c) => c,
    }
}

/// Plain SGD update x − α_k·g.
pub fn sgd_step<R: Real>(x: &[R], g: &[R], alpha_k: R) -> Vec<R> {
    let mut out = x.to_vec();
    axpy(&mut out, -alpha_k, g);
    out
}

/// Conditioned update x − α_k·C·g.
pub fn conditioned_step<R: Real>(
    x: &[R],
    g: &[R],
    c: &Matrix<R>,
    alpha_k: R,
) -> std::result::Result<Vec<R>, LinalgError> {
    let cg = c.matvec(g)?;
    Ok(sgd_step(x, &cg, alpha_k))
}

/// Mixture conditioning C = (Φ⁺ + γ⁻¹I)⁻¹ where Φ⁺ clips the negative
/// eigenvalues of the symmetrized Φ to zero. The eigenvalues of the result
/// are exactly 1/(μ_i⁺ + 1/γ), so λ_max(C) ≤ γ and λ_min(C) > 0.
pub fn mixture_condition<R: Real>(phi: &Matrix<R>, gamma_next: R) -> Result<Matrix<R>> {
    let eigen = sym_eigen(phi)?;
    let inv_gamma = R::one() / gamma_next;
    Ok(eigen.apply(|mu| R::one() / (mu.max(R::zero()) + inv_gamma)))
}

/// Running mean of iterates: avg + (x_k − avg)/k.
pub fn polyak_step<R: Real>(avg: &[R], x_k: &[R], k: usize) -> Vec<R> {
    let inv_k = R::one() / real::<R>(k as f64);
    avg.iter()
        .zip(x_k)
        .map(|(&a, &x)| a + (x - a) * inv_k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix64;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_validation() {
        assert!(Schedule::new(1.0, 0.4, GammaRule::SqrtK, 0.0, Weighting::Equal).is_err());
        assert!(Schedule::new(1.0, 1.1, GammaRule::SqrtK, 0.0, Weighting::Equal).is_err());
        assert!(Schedule::new(0.0, 1.0, GammaRule::SqrtK, 0.0, Weighting::Equal).is_err());
        assert!(Schedule::new(1.0, 1.0, GammaRule::Constant(-1.0), 0.0, Weighting::Equal).is_err());
        assert!(Schedule::new(1.0, 0.75, GammaRule::SqrtK, 10.0, Weighting::Adaptive).is_ok());
    }

    #[test]
    fn learning_rate_values() {
        let s = Schedule::new(1.0, 1.0, GammaRule::SqrtK, 0.0, Weighting::Equal).unwrap();
        assert_relative_eq!(learning_rate(10, &s), 0.1);
        assert_relative_eq!(learning_rate(1, &s), 1.0);
        let s = Schedule::new(1.0, 0.75, GammaRule::SqrtK, 0.0, Weighting::Equal).unwrap();
        assert_relative_eq!(learning_rate(4, &s), 4f64.powf(-0.75), max_relative = 1e-12);
    }

    #[test]
    fn gamma_cap_values() {
        let s = Schedule::default_equal();
        assert_relative_eq!(gamma_cap(4, &s), 2.0);
        assert_relative_eq!(gamma_cap(1, &s), 1.0);
        let c = Schedule::new(1.0, 1.0, GammaRule::Constant(3.5), 0.0, Weighting::Equal).unwrap();
        assert_relative_eq!(gamma_cap(1, &c), 3.5);
        assert_relative_eq!(gamma_cap(100, &c), 3.5);
    }

    #[test]
    fn step_functions() {
        assert_eq!(sgd_step(&[1.0, 2.0], &[0.0, 0.0], 0.5), vec![1.0, 2.0]);
        assert_eq!(sgd_step(&[0.0, 0.0], &[1.0, 0.0], 0.5), vec![-0.5, 0.0]);

        let c = Matrix64::diagonal(&[2.0, 1.0]);
        let out = conditioned_step(&[0.0, 0.0], &[1.0, 0.0], &c, 1.0).unwrap();
        assert_eq!(out, vec![-2.0, 0.0]);

        // identity conditioning reduces to the plain step
        let i = Matrix64::identity(2);
        let x = [0.3, -0.8];
        let g = [1.5, 0.25];
        assert_eq!(
            conditioned_step(&x, &g, &i, 0.7).unwrap(),
            sgd_step(&x, &g, 0.7)
        );
    }

    #[test]
    fn newton_limit_reaches_minimizer_in_one_step() {
        // C = H⁻¹ with the exact gradient H(x − x★) lands on x★
        let h = Matrix64::new(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let x_star = [0.5, -1.5];
        let x = [3.0, 2.0];
        let diff = [x[0] - x_star[0], x[1] - x_star[1]];
        let g = h.matvec(&diff).unwrap();
        let c = crate::linalg::spd_inverse(&h).unwrap();
        let next = conditioned_step(&x, &g, &c, 1.0).unwrap();
        assert_relative_eq!(next[0], x_star[0], epsilon = 1e-12);
        assert_relative_eq!(next[1], x_star[1], epsilon = 1e-12);
    }

    #[test]
    fn mixture_condition_spectral_cases() {
        // Φ = 0, γ = 4 → 4I
        let c = mixture_condition(&Matrix64::zeros(2, 2), 4.0).unwrap();
        assert!(c.sub(&Matrix64::identity(2).scale(4.0)).unwrap().frobenius_norm() < 1e-12);
        // Φ = I, γ = 1 → I/2
        let c = mixture_condition(&Matrix64::identity(2), 1.0).unwrap();
        assert!(c.sub(&Matrix64::identity(2).scale(0.5)).unwrap().frobenius_norm() < 1e-12);
        // Φ = diag(3, 0), γ = 2 → diag(1/3.5, 2)
        let c = mixture_condition(&Matrix64::diagonal(&[3.0, 0.0]), 2.0).unwrap();
        assert_relative_eq!(c[(0, 0)], 1.0 / 3.5, max_relative = 1e-12);
        assert_relative_eq!(c[(1, 1)], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn mixture_condition_clips_negative_eigenvalues() {
        let c = mixture_condition(&Matrix64::diagonal(&[-5.0, 1.0]), 2.0).unwrap();
        assert_relative_eq!(c[(0, 0)], 2.0, max_relative = 1e-12);
        assert_relative_eq!(c[(1, 1)], 1.0 / 1.5, max_relative = 1e-12);
    }

    #[test]
    fn polyak_running_mean() {
        let avg = polyak_step(&[0.0], &[0.0], 1);
        assert_eq!(avg, vec![0.0]);
        let avg = polyak_step(&avg, &[2.0], 2);
        assert_eq!(avg, vec![1.0]);
        // constant iterates stay put
        let mut a = vec![3.0, -1.0];
        for k in 1..=10 {
            a = polyak_step(&a, &[3.0, -1.0], k);
        }
        assert_eq!(a, vec![3.0, -1.0]);
    }
}
