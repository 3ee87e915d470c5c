use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use condsgd::config::parse_config;
use condsgd::experiment::run_experiment;
use condsgd::problems::load_adult_income;
use condsgd::verify::{run_verification_suite, VerifyOptions};

#[derive(Parser)]
#[command(
    name = "condsgd",
    about = "Conditioned SGD with mixture-regularized Hessian averaging: experiments and statistical verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a key=value config file.
    Run {
        /// Path to the config file.
        config: PathBuf,
    },
    /// Run the Monte Carlo verification suite and print one line per check.
    Verify {
        /// Dimension of the verification quadratic.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Number of independent trajectories per ensemble.
        #[arg(long, default_value_t = 5000)]
        traj: usize,
        /// Iterations per trajectory.
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        /// Master seed for all sweeps and ensembles.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional path for a JSON report of the results.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Parse an Adult-income style CSV and report the cleaned dataset shape.
    IngestAdult {
        /// Path to the CSV file.
        csv: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = match parse_config(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(1);
                }
            };
            match run_experiment(&cfg) {
                Ok(report) => {
                    for m in &report.methods {
                        let last = m.curve.last();
                        match last {
                            Some(p) => println!(
                                "{:<14} final mean loss {:.6e} (± {:.2e}) at k = {}",
                                m.method, p.mean_loss, p.std_loss, p.k
                            ),
                            None => println!("{:<14} produced no curve points", m.method),
                        }
                    }
                    println!("artifacts written to {}", cfg.output_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("experiment error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Verify {
            dim,
            traj,
            steps,
            seed,
            json,
        } => {
            if traj < 2 {
                eprintln!("verify needs at least 2 trajectories to estimate a covariance; got {traj}");
                return ExitCode::from(1);
            }
            let opts = VerifyOptions {
                dim,
                trajectories: traj,
                steps,
                master_seed: seed,
                gamma_scale: 1.0,
            };
            match run_verification_suite(&opts) {
                Ok(report) => {
                    report.print_summary();
                    if let Some(path) = json {
                        if let Err(e) = report.write_json(&path) {
                            eprintln!("could not write JSON report: {e}");
                            return ExitCode::from(1);
                        }
                    }
                    if report.all_passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("verification error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::IngestAdult { csv } => match load_adult_income(&csv) {
            Ok(data) => {
                println!(
                    "loaded {}: {} rows, {} features, positive rate {:.3}",
                    data.name,
                    data.n(),
                    data.dim(),
                    data.labels.iter().sum::<f64>() / data.n() as f64
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("ingest error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
