//! ℓ2-regularized logistic regression ERM with mini-batch gradient and
//! Hessian oracles. π(w,i) = 1/(1+exp(−x_iᵀw)); mini-batches are drawn
//! uniformly with replacement so each draw is exactly unbiased.

use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{Dataset, GradientSample, GroundTruth, Problem, ProblemError, Result};
use crate::linalg::{dot, norm2, solve_linear};
use crate::Matrix64;

/// Numerically stable ln(1 + e^t).
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Full-data penalized negative log-likelihood
/// F(w) = −(1/n)Σ[y log π + (1−y)log(1−π)] + (λ/2)‖w‖².
pub fn logistic_loss(w: &[f64], data: &Dataset, lambda: f64) -> Result<f64> {
    if w.len() != data.dim() {
        return Err(ProblemError::Dimension(format!(
            "weight length {} vs feature dimension {}",
            w.len(),
            data.dim()
        )));
    }
    let n = data.n() as f64;
    let mut acc = 0.0;
    for i in 0..data.n() {
        let t = dot(data.features.row(i), w);
        // −[y ln π + (1−y) ln(1−π)] = softplus(t) − y·t
        acc += softplus(t) - data.labels[i] * t;
    }
    Ok(acc / n + 0.5 * lambda * dot(w, w))
}

/// Mini-batch gradient (1/b)Σ_{i∈batch}(π(w,i) − y_i)x_i + λw.
pub fn logistic_grad_batch(
    w: &[f64],
    data: &Dataset,
    batch: &[usize],
    lambda: f64,
) -> Result<Vec<f64>> {
    check_batch(w, data, batch)?;
    let b = batch.len() as f64;
    let mut g = vec![0.0; w.len()];
    for &i in batch {
        let row = data.features.row(i);
        let coeff = (sigmoid(dot(row, w)) - data.labels[i]) / b;
        for (gj, &xj) in g.iter_mut().zip(row) {
            *gj += coeff * xj;
        }
    }
    for (gj, &wj) in g.iter_mut().zip(w) {
        *gj += lambda * wj;
    }
    Ok(g)
}

/// Mini-batch Hessian (1/b)Σ π(1−π) x_i x_iᵀ + λI, symmetric PSD.
pub fn logistic_hess_batch(
    w: &[f64],
    data: &Dataset,
    batch: &[usize],
    lambda: f64,
) -> Result<Matrix64> {
    check_batch(w, data, batch)?;
    let d = w.len();
    let b = batch.len() as f64;
    let mut h = Matrix64::zeros(d, d);
    for &i in batch {
        let row = data.features.row(i);
        let p = sigmoid(dot(row, w));
        let coeff = p * (1.0 - p) / b;
        for r in 0..d {
            let cr = coeff * row[r];
            for c in r..d {
                h[(r, c)] += cr * row[c];
            }
        }
    }
    for r in 0..d {
        h[(r, r)] += lambda;
        for c in (r + 1)..d {
            let v = h[(r, c)];
            h[(c, r)] = v;
        }
    }
    Ok(h)
}

fn check_batch(w: &[f64], data: &Dataset, batch: &[usize]) -> Result<()> {
    if w.len() != data.dim() {
        return Err(ProblemError::Dimension(format!(
            "weight length {} vs feature dimension {}",
            w.len(),
            data.dim()
        )));
    }
    if batch.is_empty() {
        return Err(ProblemError::EmptyBatch);
    }
    if let Some(&bad) = batch.iter().find(|&&i| i >= data.n()) {
        return Err(ProblemError::IndexOutOfRange {
            index: bad,
            n: data.n(),
        });
    }
    Ok(())
}

/// Deterministic full-batch Newton solve to gradient norm ≤ `tol`.
/// Returns the minimizer.
pub fn newton_solve(data: &Dataset, lambda: f64, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let d = data.dim();
    let all: Vec<usize> = (0..data.n()).collect();
    let mut w = vec![0.0; d];
    for _ in 0..max_iters {
        let g = logistic_grad_batch(&w, data, &all, lambda)?;
        if norm2(&g) <= tol {
            return Ok(w);
        }
        let h = logistic_hess_batch(&w, data, &all, lambda)?;
        let step = solve_linear(&h, &g)?;
        for (wi, si) in w.iter_mut().zip(&step) {
            *wi -= si;
        }
    }
    let g = logistic_grad_batch(&w, data, &all, lambda)?;
    if norm2(&g) <= tol {
        Ok(w)
    } else {
        Err(ProblemError::NewtonStalled(max_iters))
    }
}

/// Logistic ERM oracle with uniform-with-replacement mini-batches.
#[derive(Clone)]
pub struct LogisticProblem {
    data: Arc<Dataset>,
    lambda: f64,
    batch_size: usize,
    ground_truth: Option<GroundTruth>,
}

impl LogisticProblem {
    pub fn new(data: Arc<Dataset>, lambda: f64, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(ProblemError::EmptyBatch);
        }
        Ok(Self {
            data,
            lambda,
            batch_size,
            ground_truth: None,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Computes and caches (x★, H, Γ, F★) by a full-batch Newton solve.
    /// Γ is the covariance of a single-draw mini-batch gradient at x★.
    pub fn with_ground_truth(mut self) -> Result<Self> {
        let x_star = newton_solve(&self.data, self.lambda, 1e-12, 200)?;
        let all: Vec<usize> = (0..self.data.n()).collect();
        let h = logistic_hess_batch(&x_star, &self.data, &all, self.lambda)?;
        let f_star = logistic_loss(&x_star, &self.data, self.lambda)?;

        // single-sample gradient covariance at x★, scaled by 1/batch_size
        let d = self.data.dim();
        let full_grad = logistic_grad_batch(&x_star, &self.data, &all, self.lambda)?;
        let mut gamma = Matrix64::zeros(d, d);
        for i in 0..self.data.n() {
            let gi = logistic_grad_batch(&x_star, &self.data, &[i], self.lambda)?;
            let w: Vec<f64> = gi.iter().zip(&full_grad).map(|(a, b)| a - b).collect();
            for r in 0..d {
                for c in 0..d {
                    gamma[(r, c)] += w[r] * w[c];
                }
            }
        }
        let scale = 1.0 / (self.data.n() as f64 * self.batch_size as f64);
        let gamma = gamma.scale(scale);
        self.ground_truth = Some(GroundTruth::new(x_star, h, gamma, f_star)?);
        Ok(self)
    }
}

impl Problem for LogisticProblem {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn loss(&self, x: &[f64]) -> f64 {
        logistic_loss(x, &self.data, self.lambda).expect("dimension fixed at construction")
    }

    fn gradient_sample(&self, x: &[f64], rng: &mut dyn RngCore) -> GradientSample {
        let batch: Vec<usize> = (0..self.batch_size)
            .map(|_| rng.gen_range(0..self.data.n()))
            .collect();
        let value = logistic_grad_batch(x, &self.data, &batch, self.lambda)
            .expect("batch drawn in range");
        GradientSample {
            value,
            batch_indices: Some(batch),
        }
    }

    fn hessian_sample(
        &self,
        x: &[f64],
        batch: Option<&[usize]>,
        rng: &mut dyn RngCore,
    ) -> Matrix64 {
        let owned;
        let batch = match batch {
            Some(b) => b,
            None => {
                owned = (0..self.batch_size)
                    .map(|_| rng.gen_range(0..self.data.n()))
                    .collect::<Vec<_>>();
                &owned
            }
        };
        logistic_hess_batch(x, &self.data, batch, self.lambda).expect("batch drawn in range")
    }

    fn ground_truth(&self) -> Option<&GroundTruth> {
        self.ground_truth.as_ref()
    }
}
