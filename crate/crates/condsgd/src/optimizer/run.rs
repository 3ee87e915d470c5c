//! Trajectory loops: plain SGD, identity-conditioned parity mode, and the
//! full weighted-averaging algorithm (per step: draw g_k and H_k, form Φ_k,
//! C_k = (Φ_k + γ_{k+1}⁻¹I)⁻¹, update x_{k+1} = x_k − α_{k+1} C_k g_k).

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    conditioned_step, gamma_cap, learning_rate, mixture_condition, polyak_step, sgd_step,
    weighted_phi, HessianHistory, OptimizerError, Result, Schedule, Weighting,
};
use crate::linalg::{norm2, sym_eigen, vec_sub};
use crate::problems::Problem;
use crate::Matrix64;

const DIVERGENCE_NORM: f64 = 1e12;

/// How the descent direction is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// Plain SGD; no Hessian sampling at all.
    Plain,
    /// The conditioned code path with C forced to the identity and Hessian
    /// sampling skipped. Bit-for-bit equal to `Plain` under the same seed.
    Identity,
    /// Mixture-regularized weighted Hessian averaging.
    Mixture,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub n_iters: usize,
    pub schedule: Schedule,
    pub seed: u64,
    /// Record a trajectory row every `stride` steps (and at the final step).
    pub stride: usize,
    /// Sliding window for the adaptive history; `None` keeps everything.
    pub window: Option<usize>,
    /// Draw the Hessian mini-batch independently of the gradient's.
    pub independent_hessian_batch: bool,
    /// Verify the eigenvalue cap and weight normalization every step.
    /// Costs an extra eigendecomposition per step; test use only.
    pub check_invariants: bool,
    /// Log the loss of the Polyak average instead of the iterate.
    pub record_polyak_loss: bool,
}

impl RunOptions {
    pub fn new(n_iters: usize, schedule: Schedule, seed: u64) -> Self {
        Self {
            n_iters,
            schedule,
            seed,
            stride: (n_iters / 500).max(1),
            window: None,
            independent_hessian_batch: false,
            check_invariants: false,
            record_polyak_loss: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrajectoryRecord {
    pub k: usize,
    pub loss: f64,
    /// ‖x_k − x★‖ when the problem knows its minimizer, NaN otherwise.
    pub dist_to_opt: f64,
    /// ‖Φ_k − H‖_F when conditioning is active and H is known, NaN otherwise.
    pub phi_err: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub final_x: Vec<f64>,
    pub polyak_avg: Vec<f64>,
    pub final_phi: Option<Matrix64>,
    pub n_steps: usize,
}

impl Trajectory {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("k,loss,dist_to_opt,phi_err,seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.k, r.loss, r.dist_to_opt, r.phi_err, r.seconds
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv_string().as_bytes())
    }
}

/// Conditioned SGD with mixture regularization and weighted averaging of
/// past Hessian estimates.
pub fn run_conditioned(problem: &dyn Problem, x0: &[f64], opts: &RunOptions) -> Result<Trajectory> {
    run(problem, x0, Conditioning::Mixture, opts)
}

/// Plain SGD baseline under the identical gradient stream.
pub fn run_sgd(problem: &dyn Problem, x0: &[f64], opts: &RunOptions) -> Result<Trajectory> {
    run(problem, x0, Conditioning::Plain, opts)
}

pub fn run(
    problem: &dyn Problem,
    x0: &[f64],
    conditioning: Conditioning,
    opts: &RunOptions,
) -> Result<Trajectory> {
    assert!(opts.n_iters >= 1, "need at least one iteration");
    let d = problem.dim();
    assert_eq!(x0.len(), d, "x0 dimension mismatch");
    let start = Instant::now();

    // independent streams so that skipping Hessian draws cannot perturb the
    // gradient sequence
    let mut grad_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    grad_rng.set_stream(0);
    let mut hess_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    hess_rng.set_stream(1);

    let gt = problem.ground_truth();
    let mut x = x0.to_vec();
    let mut polyak = x0.to_vec();
    let mut phi: Option<Matrix64> = None;
    let mut history = HessianHistory::new(opts.window);
    let mut records = Vec::new();

    for k in 0..opts.n_iters {
        let step_index = k + 1;
        let alpha = learning_rate(step_index, &opts.schedule);
        let gs = problem.gradient_sample(&x, &mut grad_rng);
        if gs.value.iter().any(|v| !v.is_finite()) {
            return Err(OptimizerError::Divergence {
                step: step_index,
                norm: f64::NAN,
            });
        }

        match conditioning {
            Conditioning::Plain | Conditioning::Identity => {
                x = sgd_step(&x, &gs.value, alpha);
            }
            Conditioning::Mixture => {
                let batch = if opts.independent_hessian_batch {
                    None
                } else {
                    gs.batch_indices.as_deref()
                };
                let h_k = problem.hessian_sample(&x, batch, &mut hess_rng);
                let phi_k = match opts.schedule.weighting {
                    Weighting::Equal => {
                        // running mean over j = 0..k
                        match phi.take() {
                            None => h_k,
                            Some(prev) => {
                                let w = 1.0 / (k as f64 + 1.0);
                                prev.add(&h_k.sub(&prev)?.scale(w))?
                            }
                        }
                    }
                    Weighting::Adaptive => {
                        history.push(x.clone(), h_k);
                        weighted_phi(&history, &x, &opts.schedule)?
                    }
                };
                let gamma_next = gamma_cap(step_index, &opts.schedule);
                let c = mixture_condition(&phi_k, gamma_next)?;
                if opts.check_invariants {
                    check_step_invariants(&c, gamma_next, &history, &x, &opts.schedule)?;
                }
                phi = Some(phi_k);
                x = conditioned_step(&x, &gs.value, &c, alpha)?;
            }
        }

        let x_norm = norm2(&x);
        if !x_norm.is_finite() || x_norm > DIVERGENCE_NORM {
            return Err(OptimizerError::Divergence {
                step: step_index,
                norm: x_norm,
            });
        }
        polyak = polyak_step(&polyak, &x, step_index);

        if step_index % opts.stride == 0 || step_index == opts.n_iters {
            let loss_point = if opts.record_polyak_loss { &polyak } else { &x };
            let dist = gt
                .map(|g| norm2(&vec_sub(&x, &g.x_star)))
                .unwrap_or(f64::NAN);
            let phi_err = match (&phi, gt) {
                (Some(p), Some(g)) => p.sub(&g.h).map(|m| m.frobenius_norm()).unwrap_or(f64::NAN),
                _ => f64::NAN,
            };
            records.push(TrajectoryRecord {
                k: step_index,
                loss: problem.loss(loss_point),
                dist_to_opt: dist,
                phi_err,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }

    Ok(Trajectory {
        records,
        final_x: x,
        polyak_avg: polyak,
        final_phi: phi,
        n_steps: opts.n_iters,
    })
}

fn check_step_invariants(
    c: &Matrix64,
    gamma_next: f64,
    history: &HessianHistory<f64>,
    x: &[f64],
    schedule: &Schedule,
) -> Result<()> {
    let eigen = sym_eigen(c)?;
    assert!(
        eigen.max() <= gamma_next + 1e-9,
        "eigenvalue cap violated: λ_max(C) = {} > γ = {gamma_next}",
        eigen.max()
    );
    assert!(eigen.min() > 0.0, "conditioner not positive definite");
    if !history.is_empty() {
        let weights = history.weights(x, schedule)?;
        let sum: f64 = weights.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12, "weights sum to {sum}");
        assert!(weights.iter().all(|&w| w >= 0.0), "negative weight");
    }
    Ok(())
}
