//! Experiment orchestration: build the problem from a config, run the
//! (method × seed) grid, aggregate mean ± std loss curves, and emit
//! plot-ready CSV/JSON.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ExperimentConfig, MethodConfig, MethodKind, ProblemSpec};
use crate::linalg::Matrix;
use crate::montecarlo::derive_seed;
use crate::optimizer::{run, Conditioning, OptimizerError, RunOptions, Trajectory};
use crate::problems::{
    generate_classification_data, load_adult_income, GroundTruth, LogisticProblem, Problem,
    ProblemError, QuadraticProblem,
};
use crate::Matrix64;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Problem(#[from] ProblemError),

    #[error(transparent)]
    Optimizer(#[from] OptimizerError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    pub mean_loss: f64,
    pub std_loss: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: String,
    pub curve: Vec<CurvePoint>,
    /// Seeds whose trajectories diverged, with the failing step.
    pub failures: Vec<(u64, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub library_version: String,
    pub config: String,
    pub methods: Vec<MethodReport>,
    /// Wall-clock data; the only part of the report that varies between
    /// identical runs.
    pub timing: Timing,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub timestamp_unix: u64,
    pub wall_seconds_by_method: Vec<(String, f64)>,
}

/// Builds the stochastic problem described by the config. Logistic problems
/// get a Newton-cached ground truth when the solve succeeds; the classical
/// default λ = 1/n applies when the config leaves λ unset.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Box<dyn Problem>> {
    match &cfg.problem {
        ProblemSpec::Quadratic {
            dim,
            lambda_min,
            lambda_max,
            gamma_scale,
        } => {
            let d = *dim;
            let eigs: Vec<f64> = (0..d)
                .map(|i| {
                    if d == 1 {
                        *lambda_min
                    } else {
                        lambda_min + (lambda_max - lambda_min) * i as f64 / (d - 1) as f64
                    }
                })
                .collect();
            let h = Matrix::diagonal(&eigs);
            let gamma = Matrix64::identity(d).scale(*gamma_scale);
            let gt = GroundTruth::new(vec![1.0; d], h, gamma, 0.0)?;
            Ok(Box::new(QuadraticProblem::new(gt)?))
        }
        ProblemSpec::Synthetic { n, d, seed } => {
            let data = generate_classification_data(*n, *d, *seed)?;
            let lambda = cfg.lambda.unwrap_or(1.0 / data.n() as f64);
            let problem = LogisticProblem::new(Arc::new(data), lambda, cfg.batch)?;
            Ok(Box::new(problem.with_ground_truth().unwrap_or_else(|_| {
                // fall back to no reference optimum; loss curves still work
                LogisticProblem::new(
                    Arc::new(generate_classification_data(*n, *d, *seed).unwrap()),
                    lambda,
                    cfg.batch,
                )
                .unwrap()
            })))
        }
        ProblemSpec::Adult { path } => {
            let data = load_adult_income(path)?;
            let lambda = cfg.lambda.unwrap_or(1.0 / data.n() as f64);
            let problem = LogisticProblem::new(Arc::new(data), lambda, cfg.batch)?;
            Ok(Box::new(problem))
        }
    }
}

fn conditioning_for(kind: MethodKind) -> Conditioning {
    match kind {
        MethodKind::Sgd | MethodKind::Polyak => Conditioning::Plain,
        MethodKind::CsgdEqual | MethodKind::CsgdAdaptive => Conditioning::Mixture,
    }
}

fn options_for(cfg: &ExperimentConfig, m: &MethodConfig, seed: u64) -> RunOptions {
    let mut opts = RunOptions::new(cfg.iterations, m.schedule.clone(), seed);
    opts.stride = cfg.effective_stride();
    opts.window = m.window;
    opts.record_polyak_loss = m.kind == MethodKind::Polyak;
    opts
}

/// Runs every (method × seed) cell, aggregates loss curves, and writes
/// `report.json`, `curves_<method>.csv`, and per-run CSVs under the output
/// directory. Divergent cells are reported without aborting the rest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let problem = build_problem(cfg)?;
    let out_dir = &cfg.output_dir;
    std::fs::create_dir_all(out_dir)?;
    std::fs::create_dir_all(out_dir.join("runs"))?;
    let x0 = vec![0.0; problem.dim()];
    let seeds: Vec<u64> = (0..cfg.runs as u64)
        .map(|i| derive_seed(cfg.master_seed, i))
        .collect();

    let mut methods = Vec::new();
    let mut wall = Vec::new();
    for m in &cfg.methods {
        let start = Instant::now();
        let results: Vec<std::result::Result<Trajectory, (u64, usize)>> = seeds
            .par_iter()
            .map(|&seed| {
                let opts = options_for(cfg, m, seed);
                run(problem.as_ref(), &x0, conditioning_for(m.kind), &opts).map_err(|e| match e {
                    OptimizerError::Divergence { step, .. } => (seed, step),
                    _ => (seed, 0),
                })
            })
            .collect();

        let mut failures = Vec::new();
        let mut trajectories = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(t) => {
                    let path = out_dir
                        .join("runs")
                        .join(format!("{}_{i:04}.csv", m.kind.name()));
                    t.write_csv(&path)?;
                    trajectories.push(t);
                }
                Err(f) => failures.push(f),
            }
        }
        let curve = aggregate_curves(&trajectories);
        write_atomic(
            &out_dir.join(format!("curves_{}.csv", m.kind.name())),
            &curve_csv(&curve),
        )?;
        methods.push(MethodReport {
            method: m.kind.name().to_string(),
            curve,
            failures,
        });
        wall.push((m.kind.name().to_string(), start.elapsed().as_secs_f64()));
    }

    let report = RunReport {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: crate::config::serialize_config(cfg),
        methods,
        timing: Timing {
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_seconds_by_method: wall,
        },
    };
    write_atomic(
        &out_dir.join("report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

/// Sample mean and standard deviation of the logged losses across runs at
/// each logged step.
pub fn aggregate_curves(trajectories: &[Trajectory]) -> Vec<CurvePoint> {
    let Some(first) = trajectories.first() else {
        return Vec::new();
    };
    let runs = trajectories.len();
    first
        .records
        .iter()
        .enumerate()
        .map(|(idx, rec)| {
            let losses: Vec<f64> = trajectories.iter().map(|t| t.records[idx].loss).collect();
            let mean = losses.iter().sum::<f64>() / runs as f64;
            let std = if runs > 1 {
                (losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt()
            } else {
                0.0
            };
            CurvePoint {
                k: rec.k,
                mean_loss: mean,
                std_loss: std,
            }
        })
        .collect()
}

fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("k,mean_loss,std_loss\n");
    for p in curve {
        out.push_str(&format!("{},{:.17e},{:.17e}\n", p.k, p.mean_loss, p.std_loss));
    }
    out
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn small_config(dir: &Path) -> ExperimentConfig {
        let mut cfg = parse_config_str(
            "problem = quadratic\nquad_dim = 2\nquad_lambda_min = 1\nquad_lambda_max = 2\n\
             quad_gamma_scale = 0.5\nmethods = sgd, csgd-equal\niterations = 300\nruns = 4\n\
             stride = 50\n",
        )
        .unwrap();
        cfg.output_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn single_run_report_reduces_to_one_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.runs = 1;
        cfg.methods.truncate(1);
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.methods.len(), 1);
        let curve = &report.methods[0].curve;
        assert!(curve.iter().all(|p| p.std_loss == 0.0));
        assert_eq!(curve.len(), 6);
    }

    #[test]
    fn reaggregation_from_per_run_csvs_matches_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let report = run_experiment(&cfg).unwrap();
        for m in &report.methods {
            let runs = cfg.runs;
            // reread per-run CSVs and recompute mean/std
            let mut losses_by_row: Vec<Vec<f64>> = Vec::new();
            for i in 0..runs {
                let path = dir.path().join("runs").join(format!("{}_{i:04}.csv", m.method));
                let text = std::fs::read_to_string(&path).unwrap();
                for (row, line) in text.lines().skip(1).enumerate() {
                    let loss: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
                    if losses_by_row.len() <= row {
                        losses_by_row.push(Vec::new());
                    }
                    losses_by_row[row].push(loss);
                }
            }
            for (point, losses) in m.curve.iter().zip(&losses_by_row) {
                let mean = losses.iter().sum::<f64>() / runs as f64;
                let std = (losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>()
                    / (runs - 1) as f64)
                    .sqrt();
                assert!((point.mean_loss - mean).abs() <= 1e-12);
                assert!((point.std_loss - std).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn reports_are_deterministic_modulo_timing() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut cfg_a = small_config(dir_a.path());
        cfg_a.runs = 2;
        let mut cfg_b = cfg_a.clone();
        cfg_b.output_dir = dir_b.path().to_path_buf();
        run_experiment(&cfg_a).unwrap();
        run_experiment(&cfg_b).unwrap();
        let strip = |p: &Path| {
            let mut v: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(p.join("report.json")).unwrap())
                    .unwrap();
            v.as_object_mut().unwrap().remove("timing");
            // the config echo embeds the differing output dirs
            v.as_object_mut().unwrap().remove("config");
            v
        };
        assert_eq!(strip(dir_a.path()), strip(dir_b.path()));
    }

    #[test]
    fn conditioned_beats_plain_on_ill_conditioned_quadratic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = parse_config_str(
            "problem = quadratic\nquad_dim = 25\nquad_lambda_min = 0.1\nquad_lambda_max = 4\n\
             quad_gamma_scale = 0.25\nmethods = sgd, csgd-equal\niterations = 2000\nruns = 8\n\
             stride = 500\n",
        )
        .unwrap();
        cfg.output_dir = dir.path().to_path_buf();
        let report = run_experiment(&cfg).unwrap();
        let final_loss = |name: &str| {
            report
                .methods
                .iter()
                .find(|m| m.method == name)
                .unwrap()
                .curve
                .last()
                .unwrap()
                .mean_loss
        };
        assert!(
            final_loss("csgd-equal") <= final_loss("sgd"),
            "csgd {} vs sgd {}",
            final_loss("csgd-equal"),
            final_loss("sgd")
        );
    }
}
