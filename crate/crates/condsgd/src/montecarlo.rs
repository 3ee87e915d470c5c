//! Ensemble verification of the distributional claims: run R independent
//! trajectories, form rescaled errors √(1/α_k)(x_k − x★), estimate empirical
//! covariances and excess-risk statistics, and compare against the
//! closed-form targets from the asymptotics module.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::vec_sub;
use crate::optimizer::{learning_rate, run, Conditioning, OptimizerError, RunOptions};
use crate::problems::Problem;
use crate::Matrix64;

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error("problem must expose ground truth (x★, F★) for ensemble rescaling")]
    MissingGroundTruth,

    #[error("empirical covariance needs at least 2 trajectories, got {0}")]
    TooFewTrajectories(usize),

    #[error("{failed} of {total} trajectories diverged (seeds: {seeds:?})")]
    Divergence {
        failed: usize,
        total: usize,
        seeds: Vec<u64>,
    },

    #[error("target matrix has zero norm")]
    ZeroTarget,

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

pub type Result<T> = std::result::Result<T, MonteCarloError>;

/// Stream seed for trajectory `index`: a splitmix64-style hash of
/// (master_seed, index). Fixed so results reproduce across platforms; the
/// finalizer is a bijection, so distinct indices give distinct seeds.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add((index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Raw ensemble output: one row of rescaled error per trajectory plus the
/// per-trajectory excess-risk statistic k·(F(x_k) − F★).
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub r: usize,
    pub k_final: usize,
    pub rescaled_errors: Matrix64,
    pub excess_risks: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl EnsembleResult {
    pub fn write_rescaled_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::new();
        for i in 0..self.r {
            let row: Vec<String> = self
                .rescaled_errors
                .row(i)
                .iter()
                .map(|v| format!("{v:.17e}"))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)
    }

    pub fn write_excess_csv(&self, path: &Path) -> std::io::Result<()> {
        let out: String = self
            .excess_risks
            .iter()
            .map(|v| format!("{v:.17e}\n"))
            .collect();
        std::fs::write(path, out)
    }
}

/// Runs R independent trajectories with stream seeds derived from
/// `master_seed`. Deterministic overall; results are collected in seed
/// order regardless of scheduling.
pub fn run_ensemble(
    problem: &dyn Problem,
    x0: &[f64],
    conditioning: Conditioning,
    base_opts: &RunOptions,
    r: usize,
    master_seed: u64,
) -> Result<EnsembleResult> {
    let gt = problem
        .ground_truth()
        .ok_or(MonteCarloError::MissingGroundTruth)?;
    let d = problem.dim();
    let k_final = base_opts.n_iters;
    let alpha_k = learning_rate(k_final, &base_opts.schedule);
    let rescale = (1.0 / alpha_k).sqrt();
    let seeds: Vec<u64> = (0..r as u64).map(|i| derive_seed(master_seed, i)).collect();

    let outcomes: Vec<std::result::Result<(Vec<f64>, f64), u64>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut opts = base_opts.clone();
            opts.seed = seed;
            opts.stride = opts.n_iters; // only the endpoint matters here
            match run(problem, x0, conditioning, &opts) {
                Ok(t) => {
                    let err: Vec<f64> = vec_sub(&t.final_x, &gt.x_star)
                        .into_iter()
                        .map(|v| v * rescale)
                        .collect();
                    let excess = k_final as f64 * (problem.loss(&t.final_x) - gt.f_star);
                    Ok((err, excess))
                }
                Err(_) => Err(seed),
            }
        })
        .collect();

    let failed: Vec<u64> = outcomes.iter().filter_map(|o| o.as_ref().err().copied()).collect();
    if !failed.is_empty() {
        return Err(MonteCarloError::Divergence {
            failed: failed.len(),
            total: r,
            seeds: failed,
        });
    }

    let mut rescaled = Matrix64::zeros(r, d);
    let mut excess_risks = Vec::with_capacity(r);
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let (err, excess) = outcome.expect("failures handled above");
        for (j, v) in err.into_iter().enumerate() {
            rescaled[(i, j)] = v;
        }
        excess_risks.push(excess);
    }
    Ok(EnsembleResult {
        r,
        k_final,
        rescaled_errors: rescaled,
        excess_risks,
        seeds,
    })
}

/// Unbiased sample covariance (divide by R − 1), exactly symmetric.
pub fn empirical_covariance(samples: &Matrix64) -> Result<Matrix64> {
    let r = samples.rows();
    if r < 2 {
        return Err(MonteCarloError::TooFewTrajectories(r));
    }
    let d = samples.cols();
    let mut mean = vec![0.0; d];
    for i in 0..r {
        for (m, &v) in mean.iter_mut().zip(samples.row(i)) {
            *m += v / r as f64;
        }
    }
    let mut cov = Matrix64::zeros(d, d);
    for i in 0..r {
        let row = samples.row(i);
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    let denom = (r - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// Relative Frobenius error ‖Cov_emp − target‖_F / ‖target‖_F of the
/// ensemble's rescaled-error covariance against a limiting covariance.
pub fn clt_diagnostic(ens: &EnsembleResult, target: &Matrix64) -> Result<f64> {
    let tnorm = target.frobenius_norm();
    if tnorm == 0.0 {
        return Err(MonteCarloError::ZeroTarget);
    }
    let cov = empirical_covariance(&ens.rescaled_errors)?;
    Ok(cov.sub(target).map_err(OptimizerError::from)?.frobenius_norm() / tnorm)
}

/// Empirical mean of k(F(x_k) − F★) alongside the two candidate limits
/// Σλ and ½Σλ from the excess-risk spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct ExcessRiskCheck {
    pub emp_mean: f64,
    pub tr_spec: f64,
    pub half_tr_spec: f64,
}

pub fn excess_risk_check(ens: &EnsembleResult, spectrum: &[f64]) -> Result<ExcessRiskCheck> {
    if ens.excess_risks.is_empty() {
        return Err(MonteCarloError::EmptyEnsemble);
    }
    let emp_mean = ens.excess_risks.iter().sum::<f64>() / ens.excess_risks.len() as f64;
    let tr_spec: f64 = spectrum.iter().sum();
    Ok(ExcessRiskCheck {
        emp_mean,
        tr_spec,
        half_tr_spec: 0.5 * tr_spec,
    })
}
