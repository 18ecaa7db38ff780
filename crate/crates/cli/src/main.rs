//! `misinfo` command-line interface.
//!
//! Exit codes: 0 on success, 1 when a configuration or input file fails
//! validation, 2 on any other runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use misinfo_core::content::{synthesize_corpus, SynthesisParams};
use misinfo_core::graph::{generate_network_a, network_b, NetworkAParams};
use misinfo_core::harness::{
    metrics_json, run_sweep, validate_scenario, write_run, write_sweep, PreparedScenario, Severity, DEFAULT_RHO_GRID,
};
use misinfo_core::{Error, ScenarioConfig};

const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Parser)]
#[command(
    name = "misinfo",
    version,
    about = "Closed-loop sentiment dynamics under a misinformation-aware recommender"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trajectory, metrics and validation files.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured penalty strength.
        #[arg(long, allow_negative_numbers = true)]
        rho: Option<f64>,
        /// Override the configured master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the scenario over a grid of penalty strengths.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        rho_min: f64,
        #[arg(long, allow_negative_numbers = true)]
        rho_max: f64,
        #[arg(long, allow_negative_numbers = true)]
        rho_step: f64,
        /// Number of runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write a network file.
    GenNetwork {
        #[arg(long = "type", value_enum)]
        kind: NetworkKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of users (random network only).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Write a synthetic labeled corpus as CSV.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4000)]
        size: usize,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.537)]
        false_mean: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.379)]
        true_mean: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Check a scenario without running it and print the report as JSON.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NetworkKind {
    A,
    B,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Invalid(msg),
            e @ (Error::Json(_) | Error::MalformedRow { .. }) => Failure::Invalid(e.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

/// For errors that can only come from bad user input.
fn invalid(e: Error) -> Failure {
    Failure::Invalid(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            // Help and version requests are not failures.
            return if usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn output_dir(cfg: &ScenarioConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { config, rho, seed } => simulate(&config, rho, seed),
        Command::Sweep {
            config,
            rho_min,
            rho_max,
            rho_step,
            jobs,
        } => sweep(&config, rho_min, rho_max, rho_step, jobs),
        Command::GenNetwork { kind, out, seed, n } => {
            let net = match kind {
                NetworkKind::A => {
                    let mut params = NetworkAParams::default();
                    if let Some(n) = n {
                        params.n = n;
                    }
                    generate_network_a(params, seed).map_err(invalid)?
                }
                NetworkKind::B => {
                    if n.is_some_and(|n| n != 6) {
                        return Err(Failure::Invalid("the radical network always has 6 users".into()));
                    }
                    network_b()
                }
            };
            net.save(&out)?;
            Ok(())
        }
        Command::GenCorpus {
            out,
            size,
            false_mean,
            true_mean,
            seed,
        } => {
            let params = SynthesisParams {
                n_items: size,
                false_mean,
                true_mean,
                ..SynthesisParams::default()
            };
            synthesize_corpus(params, seed).map_err(invalid)?.save(&out)?;
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            let report = validate_scenario(&cfg, Some((DEFAULT_RHO_GRID.0, DEFAULT_RHO_GRID.1)))?;
            let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
            println!("{json}");
            for f in &report.findings {
                if f.severity != Severity::Info {
                    eprintln!("{:?}: {}", f.severity, f.message);
                }
            }
            if report.has_errors() {
                return Err(Failure::Invalid(format!("{} has errors", config.display())));
            }
            Ok(())
        }
    }
}

fn simulate(config: &Path, rho: Option<f64>, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(rho) = rho {
        cfg.cost.rho = rho;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.check().map_err(invalid)?;
    let rho = cfg.cost.rho;
    let prepared = PreparedScenario::new(cfg)?;
    let out = prepared.run(rho)?;
    for w in &out.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    let dir = write_run(&output_dir(&prepared.cfg), &prepared, rho, &out)?;
    print!("{}", metrics_json(&prepared.cfg, &out.metrics)?);
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn sweep(config: &Path, rho_min: f64, rho_max: f64, rho_step: f64, jobs: usize) -> Result<(), Failure> {
    let cfg = ScenarioConfig::load(config)?;
    let outcome = run_sweep(&cfg, rho_min, rho_max, rho_step, jobs)?;
    let dir = output_dir(&cfg);
    write_sweep(&dir, &cfg, &outcome)?;
    let failed = outcome.report.rows.iter().filter(|r| r.error.is_some()).count();
    for row in outcome.report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("rho={}: {}", row.rho, row.error.as_deref().unwrap_or_default());
    }
    eprintln!(
        "{} runs ({failed} failed); wrote {}",
        outcome.report.rows.len(),
        dir.join("sweep.csv").display()
    );
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} sweep runs failed")));
    }
    Ok(())
}
