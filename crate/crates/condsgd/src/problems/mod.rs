//! Stochastic objective oracles: a linear-Gaussian quadratic with analytic
//! ground truth, ℓ2-regularized logistic regression with mini-batch gradient
//! and Hessian generators, synthetic data generation, and Adult Income CSV
//! ingestion.

mod adult;
mod data;
mod growth;
mod logistic;
mod quadratic;

pub use adult::load_adult_income;
pub use data::{generate_classification_data, load_dataset_cache, write_dataset_cache};
pub use growth::{estimate_growth_constants, probe_points_along_top_eigenvector};
pub use logistic::{
    logistic_grad_batch, logistic_hess_batch, logistic_loss, newton_solve, LogisticProblem,
};
pub use quadratic::QuadraticProblem;

use rand::RngCore;
use thiserror::Error;

use crate::linalg::{sym_eigen, LinalgError};
use crate::Matrix64;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("batch is empty")]
    EmptyBatch,

    #[error("batch index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dataset ingestion failed: {0}")]
    Ingest(String),

    #[error("Hessian at the optimum must be positive definite (λ_min = {0:e})")]
    DegenerateHessian(f64),

    #[error("noise covariance must be symmetric PSD (λ_min = {0:e})")]
    IndefiniteCovariance(f64),

    #[error("growth-constant fit needs at least 2 distinct loss levels")]
    DegenerateProbes,

    #[error("Newton solve did not reach tolerance in {0} iterations")]
    NewtonStalled(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ProblemError>;

/// Feature matrix plus binary labels for ERM problems.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix64,
    pub labels: Vec<f64>,
    pub name: String,
}

impl Dataset {
    pub fn new(features: Matrix64, labels: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(ProblemError::Ingest("dataset must be non-empty".into()));
        }
        if labels.len() != features.rows() {
            return Err(ProblemError::Dimension(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            )));
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(ProblemError::Ingest("labels must be 0 or 1".into()));
        }
        Ok(Self {
            features,
            labels,
            name: name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

/// Analytic description of a problem's optimum: minimizer, Hessian there,
/// gradient-noise covariance, and minimum value.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub x_star: Vec<f64>,
    pub h: Matrix64,
    pub gamma: Matrix64,
    pub f_star: f64,
}

impl GroundTruth {
    pub fn new(x_star: Vec<f64>, h: Matrix64, gamma: Matrix64, f_star: f64) -> Result<Self> {
        let d = x_star.len();
        if h.rows() != d || !h.is_square() || gamma.rows() != d || !gamma.is_square() {
            return Err(ProblemError::Dimension(format!(
                "ground truth dims: x* has {d}, H is {}x{}, Γ is {}x{}",
                h.rows(),
                h.cols(),
                gamma.rows(),
                gamma.cols()
            )));
        }
        let h = h.symmetrized(1e-12)?;
        let gamma = gamma.symmetrized(1e-12)?;
        let h_min = sym_eigen(&h)?.min();
        if h_min <= 0.0 {
            return Err(ProblemError::DegenerateHessian(h_min));
        }
        let g_min = sym_eigen(&gamma)?.min();
        if g_min < -1e-10 {
            return Err(ProblemError::IndefiniteCovariance(g_min));
        }
        Ok(Self {
            x_star,
            h,
            gamma,
            f_star,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }
}

/// One stochastic gradient draw, with the mini-batch it came from when the
/// oracle is data-driven (so a Hessian draw can share the batch).
#[derive(Debug, Clone)]
pub struct GradientSample {
    pub value: Vec<f64>,
    pub batch_indices: Option<Vec<usize>>,
}

/// Stochastic objective satisfying the unbiased-gradient and
/// unbiased-Hessian assumptions.
pub trait Problem: Sync {
    fn dim(&self) -> usize;

    /// Exact objective value (full-data for ERM problems).
    fn loss(&self, x: &[f64]) -> f64;

    /// Draws a mini-batch (or noise realization) and returns the stochastic
    /// gradient at `x`.
    fn gradient_sample(&self, x: &[f64], rng: &mut dyn RngCore) -> GradientSample;

    /// Stochastic Hessian estimate at `x`. When `batch` is given it is
    /// reused; otherwise the oracle draws its own randomness from `rng`.
    fn hessian_sample(
        &self,
        x: &[f64],
        batch: Option<&[usize]>,
        rng: &mut dyn RngCore,
    ) -> Matrix64;

    fn ground_truth(&self) -> Option<&GroundTruth>;
}
