//! Verification suite: property sweeps for the Lyapunov solver and the
//! optimal-variance ordering, Monte Carlo CLT diagnostics for plain and
//! conditioned SGD, the variance-improvement margin, the excess-risk
//! constant comparison, exact identity-conditioning parity, Φ_k → H
//! convergence, and finite-difference oracle fidelity.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::asymptotics::{
    asymptotic_covariance, excess_risk_spectrum, lyapunov_residual, membership_c_h,
    optimal_covariance, solve_lyapunov, AsymptoticsError,
};
use crate::linalg::{psd_order, spd_inverse, sym_eigen, LinalgError};
use crate::montecarlo::{
    clt_diagnostic, excess_risk_check, run_ensemble, MonteCarloError,
};
use crate::optimizer::{run, Conditioning, OptimizerError, RunOptions, Schedule};
use crate::problems::{
    generate_classification_data, logistic_grad_batch, logistic_hess_batch, logistic_loss,
    GroundTruth, ProblemError, QuadraticProblem,
};
use crate::Matrix64;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Asymptotics(#[from] AsymptoticsError),
    #[error(transparent)]
    MonteCarlo(#[from] MonteCarloError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("for β = 1 plain SGD the CLT target needs 2αλ_min(H) > 1; got α = {alpha}, λ_min = {lambda_min}")]
    InadmissibleAlpha { alpha: f64, lambda_min: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, VerifyError>;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub name: String,
    pub passed: bool,
    /// Measured value the threshold applies to.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CriterionResult {
    fn leq(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
            detail,
        }
    }

    fn geq(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub dim: usize,
    pub trajectories: usize,
    pub steps: usize,
    pub master_seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub all_passed: bool,
}

impl VerificationReport {
    pub fn print_summary(&self) {
        for c in &self.criteria {
            let status = if c.passed { "PASS" } else { "FAIL" };
            println!(
                "[{status}] {:<28} value = {:.4e}  threshold = {:.4e}  {}",
                c.name, c.value, c.threshold, c.detail
            );
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub dim: usize,
    pub trajectories: usize,
    pub steps: usize,
    pub master_seed: u64,
    /// Γ = gamma_scale · I on the verification quadratic; 0 switches the CLT
    /// diagnostics to the deterministic-contraction check.
    pub gamma_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            dim: 2,
            trajectories: 5000,
            steps: 100_000,
            master_seed: 0,
            gamma_scale: 1.0,
        }
    }
}

fn random_spd(n: usize, rng: &mut impl Rng) -> Matrix64 {
    let r = Matrix64::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let mut spd = r.matmul(&r.transpose()).unwrap();
    for i in 0..n {
        spd[(i, i)] += 0.2;
    }
    spd
}

/// The verification quadratic: H = diag(2, 1, ...) interpolating from 2
/// down to 1, Γ = gamma_scale·I, x★ = 1.
pub fn verification_problem(dim: usize, gamma_scale: f64) -> Result<QuadraticProblem> {
    let eigs: Vec<f64> = (0..dim)
        .map(|i| {
            if dim == 1 {
                2.0
            } else {
                2.0 - i as f64 / (dim - 1) as f64
            }
        })
        .collect();
    let h = Matrix64::diagonal(&eigs);
    let gamma = Matrix64::identity(dim).scale(gamma_scale);
    let gt = GroundTruth::new(vec![1.0; dim], h, gamma, 0.0)?;
    Ok(QuadraticProblem::new(gt)?)
}

/// Largest ratio residual / (1 + ‖D‖_F) over random stable Lyapunov
/// instances of dimension up to `max_dim`.
pub fn lyapunov_residual_sweep(instances: usize, max_dim: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.gen_range(1..=max_dim);
        // stable operator: SPD plus a skew part keeps the symmetric part PD
        let mut k = random_spd(n, &mut rng);
        let skew = Matrix64::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
        k = k.add(&skew.sub(&skew.transpose()).unwrap().scale(0.5)).unwrap();
        let d = random_spd(n, &mut rng);
        let sigma = solve_lyapunov(&k, &d)?;
        let resid = lyapunov_residual(&k, &sigma, &d)?;
        worst = worst.max(resid / (1.0 + d.frobenius_norm()));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalitySweep {
    /// Most negative λ_min(Σ_C − Σ★) seen (should be ≥ −1e−8).
    pub worst_min_eig: f64,
    /// Frobenius gap at C = H⁻¹ (should be ≤ 1e−8).
    pub worst_equality_gap: f64,
    pub ordering_holds: bool,
}

/// Optimality sweep: random (H, Γ, C ∈ 𝒞_H) triples; the optimal covariance
/// must be ⪯ every Σ_C, with equality exactly at C = H⁻¹.
pub fn optimality_sweep(triples: usize, max_dim: usize, seed: u64) -> Result<OptimalitySweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_min_eig = f64::INFINITY;
    let mut worst_equality_gap: f64 = 0.0;
    let mut ordering_holds = true;
    for _ in 0..triples {
        let n = rng.gen_range(2..=max_dim);
        let h = random_spd(n, &mut rng);
        let gamma = random_spd(n, &mut rng);
        let hinv = spd_inverse(&h)?;
        // members of 𝒞_H near and far from the optimum
        let mut eps = rng.gen_range(0.01..1.0);
        let c = loop {
            let s = Matrix64::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let cand = hinv.add(&s.matmul(&s.transpose()).unwrap().scale(eps)).unwrap();
            if membership_c_h(&cand, &h)? {
                break cand;
            }
            eps *= 0.5;
        };
        let optimal = optimal_covariance(&h, &gamma)?;
        let sigma_c = asymptotic_covariance(&c, &h, &gamma, 1.0, 1.0)?.sigma;
        let min_eig = sym_eigen(&sigma_c.sub(&optimal)?)?.min();
        worst_min_eig = worst_min_eig.min(min_eig);
        if !psd_order(&optimal, &sigma_c, 1e-8)? {
            ordering_holds = false;
        }
        let at_optimum = asymptotic_covariance(&hinv, &h, &gamma, 1.0, 1.0)?.sigma;
        worst_equality_gap = worst_equality_gap.max(at_optimum.sub(&optimal)?.frobenius_norm());
    }
    Ok(OptimalitySweep {
        worst_min_eig,
        worst_equality_gap,
        ordering_holds,
    })
}

/// Plain-SGD CLT admissibility for β = 1: 2αλ_min(H) > 1.
pub fn validate_sgd_alpha(alpha: f64, h: &Matrix64) -> Result<()> {
    let lambda_min = sym_eigen(h)?.min();
    if 2.0 * alpha * lambda_min <= 1.0 {
        return Err(VerifyError::InadmissibleAlpha { alpha, lambda_min });
    }
    Ok(())
}

pub struct CltOutcome {
    pub diagnostic: f64,
    pub empirical_trace: f64,
    /// Standard error of the empirical trace estimate.
    pub trace_se: f64,
    pub ensemble: crate::montecarlo::EnsembleResult,
    pub target: Matrix64,
}

fn trace_stats(ens: &crate::montecarlo::EnsembleResult) -> (f64, f64) {
    let r = ens.r;
    let sq: Vec<f64> = (0..r)
        .map(|i| ens.rescaled_errors.row(i).iter().map(|v| v * v).sum())
        .collect();
    let mean = sq.iter().sum::<f64>() / r as f64;
    let var = sq.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
    (mean, (var / r as f64).sqrt())
}

/// CLT check for conditioned SGD: the empirical covariance of the rescaled
/// errors against the optimal limit H⁻¹ΓH⁻¹.
pub fn clt_conditioned(
    problem: &QuadraticProblem,
    trajectories: usize,
    steps: usize,
    master_seed: u64,
) -> Result<CltOutcome> {
    let gt = problem.ground_truth_ref();
    let target = optimal_covariance(&gt.h, &gt.gamma)?;
    let opts = RunOptions::new(steps, Schedule::default_equal(), 0);
    let ens = run_ensemble(
        problem,
        &vec![0.0; gt.dim()],
        Conditioning::Mixture,
        &opts,
        trajectories,
        master_seed,
    )?;
    let diagnostic = clt_diagnostic(&ens, &target)?;
    let (empirical_trace, trace_se) = trace_stats(&ens);
    Ok(CltOutcome {
        diagnostic,
        empirical_trace,
        trace_se,
        ensemble: ens,
        target,
    })
}

/// CLT check for plain SGD with α_k = α/k: target Σ solving
/// (H − κI)Σ + Σ(H − κI) = Γ with κ = 1/(2α). The ensemble rescales by
/// √(1/α_k), so Σ itself is the comparison target.
pub fn clt_plain_sgd(
    problem: &QuadraticProblem,
    alpha: f64,
    trajectories: usize,
    steps: usize,
    master_seed: u64,
) -> Result<CltOutcome> {
    let gt = problem.ground_truth_ref();
    validate_sgd_alpha(alpha, &gt.h)?;
    let kappa = 1.0 / (2.0 * alpha);
    let mut k_kappa = gt.h.clone();
    for i in 0..k_kappa.rows() {
        k_kappa[(i, i)] -= kappa;
    }
    let target = solve_lyapunov(&k_kappa, &gt.gamma)?;
    let schedule = Schedule::new(
        alpha,
        1.0,
        crate::optimizer::GammaRule::SqrtK,
        0.0,
        crate::optimizer::Weighting::Equal,
    )?;
    let opts = RunOptions::new(steps, schedule, 0);
    let ens = run_ensemble(
        problem,
        &vec![0.0; gt.dim()],
        Conditioning::Plain,
        &opts,
        trajectories,
        master_seed,
    )?;
    let diagnostic = clt_diagnostic(&ens, &target)?;
    let (empirical_trace, trace_se) = trace_stats(&ens);
    Ok(CltOutcome {
        diagnostic,
        empirical_trace,
        trace_se,
        ensemble: ens,
        target,
    })
}

/// Exact parity of the identity-conditioned path with plain SGD over a
/// shared gradient stream. Returns the max absolute iterate difference
/// (0 means bit-for-bit equality).
pub fn identity_equivalence(steps: usize, seed: u64) -> Result<f64> {
    let problem = verification_problem(2, 1.0)?;
    let opts = RunOptions::new(steps, Schedule::default_equal(), seed);
    let plain = run(&problem, &[0.0, 0.0], Conditioning::Plain, &opts)?;
    let ident = run(&problem, &[0.0, 0.0], Conditioning::Identity, &opts)?;
    let max_diff = plain
        .final_x
        .iter()
        .zip(&ident.final_x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(max_diff)
}

/// Φ_k → H convergence diagnostic: mean ‖Φ_k − H‖_F over seeds at an early
/// and a late step; returns (early_mean, late_mean).
pub fn phi_convergence(
    seeds: usize,
    early_k: usize,
    late_k: usize,
    master_seed: u64,
) -> Result<(f64, f64)> {
    let problem = verification_problem(2, 1.0)?.with_hessian_noise(0.5);
    let gt = problem.ground_truth_ref().clone();
    let measure = |steps: usize| -> Result<f64> {
        let mut total = 0.0;
        for i in 0..seeds {
            let mut opts = RunOptions::new(steps, Schedule::default_equal(), 0);
            opts.seed = crate::montecarlo::derive_seed(master_seed, i as u64);
            opts.stride = steps;
            let t = run(&problem, &[0.0, 0.0], Conditioning::Mixture, &opts)?;
            let phi = t.final_phi.expect("mixture run always forms Φ");
            total += phi.sub(&gt.h)?.frobenius_norm();
        }
        Ok(total / seeds as f64)
    };
    Ok((measure(early_k)?, measure(late_k)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleFidelity {
    pub worst_grad_rel_err: f64,
    pub worst_hess_rel_err: f64,
}

/// Logistic gradient vs central finite differences of the loss, and
/// Hessian vs finite differences of the gradient, over random instances.
pub fn oracle_fidelity(instances: usize, seed: u64) -> Result<OracleFidelity> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1e-5;
    let mut worst_grad: f64 = 0.0;
    let mut worst_hess: f64 = 0.0;
    for trial in 0..instances {
        let n = rng.gen_range(20..60);
        let d = rng.gen_range(2..8);
        let data = generate_classification_data(n, d, seed.wrapping_add(trial as u64))?;
        let lambda = rng.gen_range(0.0..0.5);
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let all: Vec<usize> = (0..n).collect();

        let grad = logistic_grad_batch(&w, &data, &all, lambda)?;
        let mut fd_grad = vec![0.0; d];
        for j in 0..d {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += step;
            wm[j] -= step;
            fd_grad[j] = (logistic_loss(&wp, &data, lambda)? - logistic_loss(&wm, &data, lambda)?)
                / (2.0 * step);
        }
        let gnorm = crate::linalg::norm2(&grad).max(1e-12);
        let gerr = crate::linalg::norm2(&crate::linalg::vec_sub(&grad, &fd_grad)) / gnorm;
        worst_grad = worst_grad.max(gerr);

        let hess = logistic_hess_batch(&w, &data, &all, lambda)?;
        let mut fd_hess = Matrix64::zeros(d, d);
        for j in 0..d {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += step;
            wm[j] -= step;
            let gp = logistic_grad_batch(&wp, &data, &all, lambda)?;
            let gm = logistic_grad_batch(&wm, &data, &all, lambda)?;
            for i in 0..d {
                fd_hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        let herr = hess.sub(&fd_hess)?.frobenius_norm() / hess.frobenius_norm().max(1e-12);
        worst_hess = worst_hess.max(herr);
    }
    Ok(OracleFidelity {
        worst_grad_rel_err: worst_grad,
        worst_hess_rel_err: worst_hess,
    })
}

/// Runs the full suite at the configured budgets and collects one
/// pass/fail line per criterion.
pub fn run_verification_suite(opts: &VerifyOptions) -> Result<VerificationReport> {
    let mut criteria = Vec::new();

    let worst = lyapunov_residual_sweep(200, 20, opts.master_seed.wrapping_add(1))?;
    criteria.push(CriterionResult::leq(
        "lyapunov-residual",
        worst,
        1e-9,
        "max residual/(1+‖D‖_F) over 200 random stable instances, d ≤ 20".into(),
    ));

    let sweep = optimality_sweep(100, 10, opts.master_seed.wrapping_add(2))?;
    criteria.push(CriterionResult::geq(
        "optimal-variance-ordering",
        sweep.worst_min_eig,
        -1e-8,
        format!(
            "min λ_min(Σ_C − Σ★) over 100 triples; psd_order holds: {}",
            sweep.ordering_holds
        ),
    ));
    criteria.push(CriterionResult::leq(
        "optimal-variance-equality",
        sweep.worst_equality_gap,
        1e-8,
        "‖Σ_{H⁻¹} − H⁻¹ΓH⁻¹‖_F at the optimum".into(),
    ));

    let problem = verification_problem(opts.dim, opts.gamma_scale)?;
    if opts.gamma_scale == 0.0 {
        // degenerate branch: no noise, the law collapses; check contraction
        let run_opts = RunOptions::new(opts.steps.min(10_000), Schedule::default_equal(), 1);
        let t = run(&problem, &vec![0.0; opts.dim], Conditioning::Mixture, &run_opts)?;
        let gt = problem.ground_truth_ref();
        let dist = crate::linalg::norm2(&crate::linalg::vec_sub(&t.final_x, &gt.x_star));
        criteria.push(CriterionResult::leq(
            "deterministic-contraction",
            dist,
            1e-6,
            "zero-noise substitute for the CLT diagnostics".into(),
        ));
    } else {
        let cond = clt_conditioned(&problem, opts.trajectories, opts.steps, opts.master_seed)?;
        criteria.push(CriterionResult::leq(
            "clt-conditioned",
            cond.diagnostic,
            0.15,
            "rel. Frobenius error of Cov(√k(x_k−x★)) vs H⁻¹ΓH⁻¹".into(),
        ));

        let plain = clt_plain_sgd(
            &problem,
            1.0,
            opts.trajectories,
            opts.steps,
            opts.master_seed.wrapping_add(3),
        )?;
        criteria.push(CriterionResult::leq(
            "clt-plain-sgd",
            plain.diagnostic,
            0.15,
            "rel. Frobenius error vs the Lyapunov solution for C = αI".into(),
        ));

        let margin = plain.empirical_trace - cond.empirical_trace;
        let se = (plain.trace_se.powi(2) + cond.trace_se.powi(2)).sqrt();
        criteria.push(CriterionResult::geq(
            "variance-improvement",
            margin,
            2.0 * se,
            format!(
                "trace gap {:.4e} vs 2×MC se {:.4e}",
                margin,
                2.0 * se
            ),
        ));

        let gt = problem.ground_truth_ref();
        let spectrum = excess_risk_spectrum(&gt.h, &gt.gamma)?;
        let check = excess_risk_check(&cond.ensemble, &spectrum)?;
        let rel_full = (check.emp_mean / check.tr_spec - 1.0).abs();
        let rel_half = (check.emp_mean / check.half_tr_spec - 1.0).abs();
        let best = rel_full.min(rel_half);
        let which = if rel_half <= rel_full { "½Σλ" } else { "Σλ" };
        criteria.push(CriterionResult::leq(
            "excess-risk-constant",
            best,
            0.2,
            format!(
                "mean k(F−F★) = {:.4} vs Σλ = {:.4}, ½Σλ = {:.4}; closer to {which}",
                check.emp_mean, check.tr_spec, check.half_tr_spec
            ),
        ));
    }

    let diff = identity_equivalence(10_000, opts.master_seed.wrapping_add(4))?;
    criteria.push(CriterionResult::leq(
        "identity-conditioning-parity",
        diff,
        0.0,
        "max |Δx| between forced C = I and plain SGD after 10⁴ shared-stream steps".into(),
    ));

    let (early, late) = phi_convergence(50, 100, 10_000, opts.master_seed.wrapping_add(5))?;
    criteria.push(CriterionResult::geq(
        "phi-convergence",
        early / late,
        3.0,
        format!("mean ‖Φ_k − H‖_F: {early:.4e} at k=10² vs {late:.4e} at k=10⁴"),
    ));

    let fidelity = oracle_fidelity(20, opts.master_seed.wrapping_add(6))?;
    criteria.push(CriterionResult::leq(
        "gradient-fidelity",
        fidelity.worst_grad_rel_err,
        1e-6,
        "logistic gradient vs central finite differences".into(),
    ));
    criteria.push(CriterionResult::leq(
        "hessian-fidelity",
        fidelity.worst_hess_rel_err,
        1e-5,
        "logistic Hessian vs gradient finite differences".into(),
    ));

    let all_passed = criteria.iter().all(|c| c.passed);
    Ok(VerificationReport {
        dim: opts.dim,
        trajectories: opts.trajectories,
        steps: opts.steps,
        master_seed: opts.master_seed,
        criteria,
        all_passed,
    })
}
