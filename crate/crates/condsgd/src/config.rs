//! Experiment configuration: flat key-value text with optional INI-style
//! per-method sections. Diff-able and hand-editable; every parse error
//! names the offending key and the constraint it violated.
//!
//! ```text
//! problem = synthetic
//! n = 1500
//! d = 25
//! data_seed = 7
//! methods = sgd, csgd-adaptive
//! batch = 16
//! iterations = 2000
//! runs = 100
//!
//! [csgd-adaptive]
//! eta = 10
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::optimizer::{GammaRule, OptimizerError, Schedule, Weighting};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("key `{key}`: {constraint} (got `{value}`)")]
    InvalidValue {
        key: String,
        constraint: String,
        value: String,
    },

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("unknown method `{0}` (expected sgd, csgd-equal, csgd-adaptive, polyak)")]
    UnknownMethod(String),

    #[error("method list must be non-empty")]
    NoMethods,

    #[error("malformed line {line}: `{text}`")]
    Malformed { line: usize, text: String },

    #[error(transparent)]
    Schedule(#[from] OptimizerError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    /// Synthetic quadratic with H = diag(linspace(λ_min, λ_max)),
    /// Γ = gamma_scale·I, x★ = 0.
    Quadratic {
        dim: usize,
        lambda_min: f64,
        lambda_max: f64,
        gamma_scale: f64,
    },
    /// Synthetic logistic classification data.
    Synthetic { n: usize, d: usize, seed: u64 },
    /// Adult Income CSV on disk.
    Adult { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Sgd,
    CsgdEqual,
    CsgdAdaptive,
    Polyak,
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Sgd => "sgd",
            MethodKind::CsgdEqual => "csgd-equal",
            MethodKind::CsgdAdaptive => "csgd-adaptive",
            MethodKind::Polyak => "polyak",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(MethodKind::Sgd),
            "csgd-equal" => Ok(MethodKind::CsgdEqual),
            "csgd-adaptive" => Ok(MethodKind::CsgdAdaptive),
            "polyak" => Ok(MethodKind::Polyak),
            other => Err(ConfigError::UnknownMethod(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub kind: MethodKind,
    pub schedule: Schedule,
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub methods: Vec<MethodConfig>,
    pub batch: usize,
    pub iterations: usize,
    pub runs: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// 0 means automatic: max(1, iterations / 500).
    pub stride: usize,
    /// ℓ2 regularization; `None` defaults to 1/n at run time.
    pub lambda: Option<f64>,
}

impl ExperimentConfig {
    pub fn effective_stride(&self) -> usize {
        if self.stride == 0 {
            (self.iterations / 500).max(1)
        } else {
            self.stride
        }
    }
}

// schedule-ish keys that sections may override
#[derive(Debug, Clone, Default)]
struct ScheduleOverride {
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<GammaRule>,
    eta: Option<f64>,
    window: Option<Option<usize>>,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut problem_kind: Option<String> = None;
    let mut n: Option<usize> = None;
    let mut d: Option<usize> = None;
    let mut data_seed: u64 = 0;
    let mut adult_path: Option<PathBuf> = None;
    let mut quad_dim: usize = 2;
    let mut quad_lambda_min: f64 = 1.0;
    let mut quad_lambda_max: f64 = 2.0;
    let mut quad_gamma_scale: f64 = 1.0;
    let mut methods: Vec<MethodKind> = vec![MethodKind::Sgd, MethodKind::CsgdAdaptive];
    let mut base = ScheduleOverride::default();
    let mut sections: Vec<(MethodKind, ScheduleOverride)> = Vec::new();
    let mut batch: usize = 16;
    let mut iterations: usize = 2000;
    let mut runs: usize = 100;
    let mut master_seed: u64 = 0;
    let mut output_dir = PathBuf::from("out");
    let mut stride: usize = 0;
    let mut lambda: Option<f64> = None;

    let mut current_section: Option<usize> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let kind = MethodKind::parse(name.trim())?;
            sections.push((kind, ScheduleOverride::default()));
            current_section = Some(sections.len() - 1);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Malformed {
                line: lineno + 1,
                text: raw.into(),
            });
        };
        let key = key.trim();
        let value = value.trim();

        if let Some(idx) = current_section {
            apply_schedule_key(&mut sections[idx].1, key, value)?;
            continue;
        }
        match key {
            "problem" => problem_kind = Some(value.to_string()),
            "n" => n = Some(parse_num(key, value, "must be a positive integer", |v: usize| v >= 1)?),
            "d" => d = Some(parse_num(key, value, "must be a positive integer", |v: usize| v >= 1)?),
            "data_seed" => data_seed = parse_num(key, value, "must be an integer", |_: u64| true)?,
            "adult_path" => adult_path = Some(PathBuf::from(value)),
            "quad_dim" => {
                quad_dim = parse_num(key, value, "must be a positive integer", |v: usize| v >= 1)?
            }
            "quad_lambda_min" => {
                quad_lambda_min = parse_num(key, value, "must be positive", |v: f64| v > 0.0)?
            }
            "quad_lambda_max" => {
                quad_lambda_max = parse_num(key, value, "must be positive", |v: f64| v > 0.0)?
            }
            "quad_gamma_scale" => {
                quad_gamma_scale = parse_num(key, value, "must be >= 0", |v: f64| v >= 0.0)?
            }
            "methods" => {
                methods = value
                    .split(',')
                    .map(|m| MethodKind::parse(m.trim()))
                    .collect::<Result<_>>()?;
                if methods.is_empty() {
                    return Err(ConfigError::NoMethods);
                }
            }
            "batch" => batch = parse_num(key, value, "must be >= 1", |v: usize| v >= 1)?,
            "iterations" => {
                iterations = parse_num(key, value, "must be >= 1", |v: usize| v >= 1)?
            }
            "runs" => runs = parse_num(key, value, "must be >= 1", |v: usize| v >= 1)?,
            "master_seed" => {
                master_seed = parse_num(key, value, "must be an integer", |_: u64| true)?
            }
            "output_dir" => output_dir = PathBuf::from(value),
            "stride" => stride = parse_num(key, value, "must be an integer", |_: usize| true)?,
            "lambda" => {
                lambda = Some(parse_num(key, value, "must be >= 0", |v: f64| v >= 0.0)?)
            }
            _ if is_schedule_key(key) => apply_schedule_key(&mut base, key, value)?,
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
    }

    let problem = match problem_kind.as_deref() {
        None => return Err(ConfigError::MissingKey("problem".into())),
        Some("quadratic") => ProblemSpec::Quadratic {
            dim: quad_dim,
            lambda_min: quad_lambda_min,
            lambda_max: quad_lambda_max,
            gamma_scale: quad_gamma_scale,
        },
        Some("synthetic") => ProblemSpec::Synthetic {
            n: n.unwrap_or(1500),
            d: d.unwrap_or(25),
            seed: data_seed,
        },
        Some("adult") => ProblemSpec::Adult {
            path: adult_path.ok_or_else(|| ConfigError::MissingKey("adult_path".into()))?,
        },
        Some(other) => {
            return Err(ConfigError::InvalidValue {
                key: "problem".into(),
                constraint: "must be quadratic, synthetic, or adult".into(),
                value: other.into(),
            })
        }
    };

    let methods = methods
        .into_iter()
        .map(|kind| build_method(kind, &base, &sections))
        .collect::<Result<Vec<_>>>()?;

    Ok(ExperimentConfig {
        problem,
        methods,
        batch,
        iterations,
        runs,
        master_seed,
        output_dir,
        stride,
        lambda,
    })
}

fn is_schedule_key(key: &str) -> bool {
    matches!(key, "alpha" | "beta" | "gamma" | "eta" | "window")
}

fn apply_schedule_key(ov: &mut ScheduleOverride, key: &str, value: &str) -> Result<()> {
    match key {
        "alpha" => ov.alpha = Some(parse_num(key, value, "must be > 0", |v: f64| v > 0.0)?),
        "beta" => {
            ov.beta = Some(parse_num(key, value, "must lie in (1/2, 1]", |v: f64| {
                v > 0.5 && v <= 1.0
            })?)
        }
        "gamma" => {
            ov.gamma = Some(if value == "sqrt" {
                GammaRule::SqrtK
            } else if let Some(c) = value.strip_prefix("constant:") {
                GammaRule::Constant(parse_num("gamma", c.trim(), "constant must be > 0", |v: f64| {
                    v > 0.0
                })?)
            } else {
                return Err(ConfigError::InvalidValue {
                    key: "gamma".into(),
                    constraint: "must be `sqrt` or `constant:<c>`".into(),
                    value: value.into(),
                });
            })
        }
        "eta" => ov.eta = Some(parse_num(key, value, "must be >= 0", |v: f64| v >= 0.0)?),
        "window" => {
            ov.window = Some(if value.is_empty() || value == "none" {
                None
            } else {
                Some(parse_num(key, value, "must be >= 1", |v: usize| v >= 1)?)
            })
        }
        other => return Err(ConfigError::UnknownKey(other.into())),
    }
    Ok(())
}

fn build_method(
    kind: MethodKind,
    base: &ScheduleOverride,
    sections: &[(MethodKind, ScheduleOverride)],
) -> Result<MethodConfig> {
    let section = sections.iter().rev().find(|(k, _)| *k == kind).map(|(_, o)| o);
    let pick_f64 = |sel: fn(&ScheduleOverride) -> Option<f64>, default: f64| {
        section.and_then(sel).or_else(|| sel(base)).unwrap_or(default)
    };
    let alpha = pick_f64(|o| o.alpha, 1.0);
    let beta = pick_f64(|o| o.beta, 1.0);
    let eta = pick_f64(|o| o.eta, 10.0);
    let gamma = section
        .and_then(|o| o.gamma)
        .or(base.gamma)
        .unwrap_or(GammaRule::SqrtK);
    let window = section
        .and_then(|o| o.window)
        .or(base.window)
        .unwrap_or(None);
    let weighting = match kind {
        MethodKind::CsgdAdaptive => Weighting::Adaptive,
        _ => Weighting::Equal,
    };
    Ok(MethodConfig {
        kind,
        schedule: Schedule::new(alpha, beta, gamma, eta, weighting)?,
        window,
    })
}

fn parse_num<T: std::str::FromStr + Copy>(
    key: &str,
    value: &str,
    constraint: &str,
    check: impl Fn(T) -> bool,
) -> Result<T> {
    let parsed: T = value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.into(),
        constraint: constraint.into(),
        value: value.into(),
    })?;
    if !check(parsed) {
        return Err(ConfigError::InvalidValue {
            key: key.into(),
            constraint: constraint.into(),
            value: value.into(),
        });
    }
    Ok(parsed)
}

/// Serializes a config back to the text format; `parse(serialize(c)) == c`.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    match &cfg.problem {
        ProblemSpec::Quadratic {
            dim,
            lambda_min,
            lambda_max,
            gamma_scale,
        } => {
            let _ = writeln!(out, "problem = quadratic");
            let _ = writeln!(out, "quad_dim = {dim}");
            let _ = writeln!(out, "quad_lambda_min = {lambda_min}");
            let _ = writeln!(out, "quad_lambda_max = {lambda_max}");
            let _ = writeln!(out, "quad_gamma_scale = {gamma_scale}");
        }
        ProblemSpec::Synthetic { n, d, seed } => {
            let _ = writeln!(out, "problem = synthetic");
            let _ = writeln!(out, "n = {n}");
            let _ = writeln!(out, "d = {d}");
            let _ = writeln!(out, "data_seed = {seed}");
        }
        ProblemSpec::Adult { path } => {
            let _ = writeln!(out, "problem = adult");
            let _ = writeln!(out, "adult_path = {}", path.display());
        }
    }
    let names: Vec<&str> = cfg.methods.iter().map(|m| m.kind.name()).collect();
    let _ = writeln!(out, "methods = {}", names.join(", "));
    let _ = writeln!(out, "batch = {}", cfg.batch);
    let _ = writeln!(out, "iterations = {}", cfg.iterations);
    let _ = writeln!(out, "runs = {}", cfg.runs);
    let _ = writeln!(out, "master_seed = {}", cfg.master_seed);
    let _ = writeln!(out, "output_dir = {}", cfg.output_dir.display());
    let _ = writeln!(out, "stride = {}", cfg.stride);
    if let Some(l) = cfg.lambda {
        let _ = writeln!(out, "lambda = {l}");
    }
    for m in &cfg.methods {
        let _ = writeln!(out, "\n[{}]", m.kind.name());
        let _ = writeln!(out, "alpha = {}", m.schedule.alpha);
        let _ = writeln!(out, "beta = {}", m.schedule.beta);
        match m.schedule.gamma_rule {
            GammaRule::SqrtK => {
                let _ = writeln!(out, "gamma = sqrt");
            }
            GammaRule::Constant(c) => {
                let _ = writeln!(out, "gamma = constant:{c}");
            }
        }
        let _ = writeln!(out, "eta = {}", m.schedule.eta);
        match m.window {
            Some(w) => {
                let _ = writeln!(out, "window = {w}");
            }
            None => {
                let _ = writeln!(out, "window = none");
            }
        }
    }
    out
}
