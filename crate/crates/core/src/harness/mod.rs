//! Scenario orchestration: closed-loop runs, penalty sweeps and file output.
//!
//! Output layout under a run directory `<output_dir>/<run-id>/`:
//! `trajectory.csv`, `metrics.json` and `validation.json`. A sweep writes
//! one run directory per penalty value plus `sweep.csv` and `sweep.json`
//! at the top of the output directory.

mod config;
mod validate;

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::content::{self, schedule_appearances, select_discrete, synthesize_corpus, Corpus};
use crate::control::{mb_steady_state, mf_control_at_age, CondensedMpc, SteadyState};
use crate::costfn::CostParams;
use crate::dynamics::{build_matrices, spectral_radius_check, step, SystemMatrices, Trajectory};
use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::graph::{self, generate_network_a, network_b, Network};
use crate::metrics::{self, pareto_points, ParetoPoint, RunMetrics};
use crate::rng::derive_seed;

pub use config::{
    Controller, CorpusSpec, EmptyPolicy, Mode, NetworkSpec, ScenarioConfig, DEFAULT_RHO_GRID, DEFAULT_SEEDS,
    SCHEMA_VERSION,
};
pub use validate::{validate_scenario, Finding, ScenarioValidation, Severity};

const CORPUS_SEED_SALT: u64 = 1;
const SCHEDULE_SEED_SALT: u64 = 2;

/// Network, matrices and scheduled corpus shared by every run of a scenario.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub cfg: ScenarioConfig,
    pub network: Network,
    pub matrices: SystemMatrices,
    pub corpus: Option<Corpus>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunDiagnostics {
    /// Spectral radius of the model-free closed loop (zero novelty decay only).
    pub spectral_radius: Option<f64>,
    pub warnings: Vec<String>,
    /// Steps where no content was eligible.
    pub empty_steps: usize,
    pub mpc_max_iterations: Option<usize>,
    pub mpc_max_kkt_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub metrics: RunMetrics,
    pub diagnostics: RunDiagnostics,
}

pub fn load_network(spec: &NetworkSpec, scenario_seed: u64) -> Result<Network> {
    match spec {
        NetworkSpec::A { params, seed } => generate_network_a(*params, seed.unwrap_or(scenario_seed)),
        NetworkSpec::B => Ok(network_b()),
        NetworkSpec::File { path } => Network::load(path),
    }
}

/// Loads or synthesizes the corpus and schedules it unless it already
/// carries creation steps.
pub fn load_corpus(spec: &CorpusSpec, tau: u64, scenario_seed: u64) -> Result<Corpus> {
    let corpus = match spec {
        CorpusSpec::Synthetic { params, seed } => synthesize_corpus(
            *params,
            seed.unwrap_or_else(|| derive_seed(scenario_seed, CORPUS_SEED_SALT)),
        )?,
        CorpusSpec::File { path } => content::ingest_corpus(path)?,
    };
    if corpus.meta.scheduled {
        Ok(corpus)
    } else {
        schedule_appearances(&corpus, tau, derive_seed(scenario_seed, SCHEDULE_SEED_SALT))
    }
}

impl PreparedScenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.check()?;
        let network = load_network(&cfg.network, cfg.seed)?;
        let report = graph::validate(&network);
        if !report.is_clean() {
            return Err(Error::Config(format!("network is invalid: {:?}", report.violations)));
        }
        let matrices = build_matrices(&network);
        let corpus = match (cfg.mode, &cfg.corpus) {
            (Mode::Discrete, Some(spec)) => Some(load_corpus(spec, cfg.tau, cfg.seed)?),
            _ => None,
        };
        Ok(Self {
            cfg,
            network,
            matrices,
            corpus,
        })
    }

    /// Runs the closed loop at penalty `rho`; everything else comes from the config.
    pub fn run(&self, rho: f64) -> Result<RunOutput> {
        let cfg = &self.cfg;
        let cost = cfg.effective_cost(rho);
        cost.check()?;
        let m = &self.matrices;
        let mut diagnostics = RunDiagnostics::default();

        if cost.delta_novelty == 0.0 {
            let radius = spectral_radius_check(m, &cost, 0)?;
            diagnostics.spectral_radius = Some(radius);
            if radius >= 1.0 {
                diagnostics.warnings.push(format!(
                    "closed-loop spectral radius {radius} >= 1; convergence is not guaranteed"
                ));
            }
        }

        let mut controller = self.controller(&cost)?;
        let mut traj = Trajectory::new(self.network.x0.clone());
        let mut previous_u = 0.0;
        for t in 0..cfg.tau {
            let x = traj.last_state().clone();
            let target = controller.control(m, &x).map_err(|e| e.at_step(t))?;
            let (u, content_id) = match &self.corpus {
                None => (target, None),
                Some(corpus) => {
                    let candidates = corpus.eligible(t, cost.window_z);
                    if candidates.is_empty() {
                        diagnostics.empty_steps += 1;
                        let held = match cfg.empty_policy {
                            EmptyPolicy::Hold => previous_u,
                            EmptyPolicy::Zero => 0.0,
                        };
                        (held, None)
                    } else {
                        let item = select_discrete(&x, target, &candidates, t, &cost).map_err(|e| e.at_step(t))?;
                        (item.score, Some(item.id.clone()))
                    }
                }
            };
            let next = step(m, &x, u).map_err(|e| e.at_step(t))?;
            traj.push(u, target, content_id, next);
            previous_u = u;
        }
        if let Some(stats) = controller.mpc_stats() {
            diagnostics.mpc_max_iterations = Some(stats.0);
            diagnostics.mpc_max_kkt_residual = Some(stats.1);
        }
        if diagnostics.empty_steps > 0 {
            diagnostics
                .warnings
                .push(format!("{} steps had no eligible content", diagnostics.empty_steps));
        }

        let misinformation = match &self.corpus {
            None => None,
            Some(corpus) => match metrics::misinformation_ratio(&traj, corpus) {
                Ok(v) => Some(v),
                Err(Error::UndefinedMetric(why)) => {
                    diagnostics
                        .warnings
                        .push(format!("misinformation metric undefined: {why}"));
                    None
                }
                Err(e) => return Err(e),
            },
        };
        let (shift_mean, shift_median) = metrics::sentiment_shift(&traj)?;
        let (cost_mean, cost_median) = metrics::engagement_cost_per_user(&traj)?;
        Ok(RunOutput {
            trajectory: traj,
            metrics: RunMetrics {
                misinformation,
                sentiment_shift_mean: shift_mean,
                sentiment_shift_median: shift_median,
                engagement_cost_mean: cost_mean,
                engagement_cost_median: cost_median,
                rho: cost.rho,
            },
            diagnostics,
        })
    }

    fn controller(&self, cost: &CostParams) -> Result<ActiveController> {
        Ok(match self.cfg.controller {
            Controller::Baseline | Controller::Mf => ActiveController::ModelFree { cost: *cost },
            Controller::Mb => {
                // Continuous recommendations have age zero; the novelty factor is frozen there.
                let target = mb_steady_state(&self.matrices, cost, 0)?;
                let mpc = CondensedMpc::new(&self.matrices, cost.rho, cost.decay(0), self.cfg.mpc)?;
                ActiveController::ModelBased {
                    mpc,
                    target,
                    warm: None,
                    max_iterations: 0,
                    max_residual: 0.0,
                }
            }
        })
    }
}

enum ActiveController {
    ModelFree {
        cost: CostParams,
    },
    ModelBased {
        mpc: CondensedMpc,
        target: SteadyState,
        warm: Option<DVector<f64>>,
        max_iterations: usize,
        max_residual: f64,
    },
}

impl ActiveController {
    fn control(&mut self, m: &SystemMatrices, x: &DVector<f64>) -> Result<f64> {
        match self {
            ActiveController::ModelFree { cost } => Ok(mf_control_at_age(x, cost, 0)),
            ActiveController::ModelBased {
                mpc,
                target,
                warm,
                max_iterations,
                max_residual,
            } => {
                let out = mpc.solve(m, x, target, warm.as_ref())?;
                *max_iterations = (*max_iterations).max(out.iterations);
                *max_residual = max_residual.max(out.kkt_residual);
                // Shift the optimal sequence by one step for the next solve.
                let seq = &out.sequence;
                let len = seq.len();
                *warm = Some(DVector::from_fn(len, |k, _| seq[(k + 1).min(len - 1)]));
                Ok(out.u)
            }
        }
    }

    fn mpc_stats(&self) -> Option<(usize, f64)> {
        match self {
            ActiveController::ModelFree { .. } => None,
            ActiveController::ModelBased {
                max_iterations,
                max_residual,
                ..
            } => Some((*max_iterations, *max_residual)),
        }
    }
}

/// Prepares and runs a single scenario at the configured penalty.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let prepared = PreparedScenario::new(cfg.clone())?;
    prepared.run(cfg.cost.rho)
}

/// Penalty values `min, min + step, …` up to `max`, rounded to 12 decimals.
pub fn rho_grid(rho_min: f64, rho_max: f64, rho_step: f64) -> Result<Vec<f64>> {
    if !(rho_min.is_finite() && rho_max.is_finite() && rho_min >= 0.0 && rho_min <= rho_max) {
        return Err(Error::Config(format!("invalid penalty range [{rho_min}, {rho_max}]")));
    }
    if !(rho_step > 0.0 && rho_step.is_finite()) {
        return Err(Error::Config(format!("penalty step must be positive, got {rho_step}")));
    }
    let count = ((rho_max - rho_min) / rho_step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| ((rho_min + k as f64 * rho_step) * 1e12).round() / 1e12)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rho: f64,
    pub metrics: Option<RunMetrics>,
    pub diagnostics: Option<RunDiagnostics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub run_ids: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub pareto: Vec<ParetoPoint>,
}

/// Result of a sweep: the report plus every successful run's output.
pub struct SweepOutcome {
    pub report: SweepReport,
    pub runs: Vec<Option<RunOutput>>,
}

/// Runs the scenario for every penalty on the grid, `jobs` at a time.
///
/// Network, corpus and schedule are prepared once and shared; only the
/// penalty varies. Results are ordered by penalty regardless of `jobs`.
pub fn run_sweep(cfg: &ScenarioConfig, rho_min: f64, rho_max: f64, rho_step: f64, jobs: usize) -> Result<SweepOutcome> {
    let grid = rho_grid(rho_min, rho_max, rho_step)?;
    let prepared = PreparedScenario::new(cfg.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunOutput>> = pool.install(|| grid.par_iter().map(|&rho| prepared.run(rho)).collect());

    let mut rows = Vec::with_capacity(grid.len());
    let mut runs = Vec::with_capacity(grid.len());
    for (&rho, result) in grid.iter().zip(results) {
        match result {
            Ok(out) => {
                rows.push(SweepRow {
                    rho,
                    metrics: Some(out.metrics.clone()),
                    diagnostics: Some(out.diagnostics.clone()),
                    error: None,
                });
                runs.push(Some(out));
            }
            Err(e) => {
                rows.push(SweepRow {
                    rho,
                    metrics: None,
                    diagnostics: None,
                    error: Some(e.to_string()),
                });
                runs.push(None);
            }
        }
    }
    let ok: Vec<RunMetrics> = rows.iter().filter_map(|r| r.metrics.clone()).collect();
    Ok(SweepOutcome {
        report: SweepReport {
            run_ids: grid.iter().map(|&rho| cfg.run_id(rho)).collect(),
            rows,
            pareto: pareto_points(&ok),
        },
        runs,
    })
}

#[derive(Serialize)]
struct MetricsRecord<'a> {
    #[serde(flatten)]
    metrics: &'a RunMetrics,
    provenance: Provenance,
}

#[derive(Serialize)]
struct Provenance {
    seed: u64,
    network: &'static str,
    controller: Controller,
    mode: Mode,
}

#[derive(Serialize)]
struct RunValidation<'a> {
    network: &'a graph::ValidationReport,
    diagnostics: &'a RunDiagnostics,
}

pub fn metrics_json(cfg: &ScenarioConfig, metrics: &RunMetrics) -> Result<String> {
    let record = MetricsRecord {
        metrics,
        provenance: Provenance {
            seed: cfg.seed,
            network: cfg.network.label(),
            controller: cfg.controller,
            mode: cfg.mode,
        },
    };
    Ok(serde_json::to_string_pretty(&record)? + "\n")
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `trajectory.csv`, `metrics.json` and `validation.json` into
/// `<output_dir>/<run-id>/` and returns that directory.
pub fn write_run(output_dir: &Path, prepared: &PreparedScenario, rho: f64, out: &RunOutput) -> Result<PathBuf> {
    let dir = output_dir.join(prepared.cfg.run_id(rho));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_file(&dir.join("trajectory.csv"), out.trajectory.to_csv_string()?.as_bytes())?;
    write_file(
        &dir.join("metrics.json"),
        metrics_json(&prepared.cfg, &out.metrics)?.as_bytes(),
    )?;
    let validation = RunValidation {
        network: &graph::validate(&prepared.network),
        diagnostics: &out.diagnostics,
    };
    write_file(
        &dir.join("validation.json"),
        (serde_json::to_string_pretty(&validation)? + "\n").as_bytes(),
    )?;
    Ok(dir)
}

/// `sweep.csv`: one row per penalty with the misinformation ratio and the
/// engagement-cost and sentiment-shift summaries.
pub fn sweep_csv(report: &SweepReport) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "rho",
        "misinformation",
        "engagement_cost_mean",
        "engagement_cost_median",
        "sentiment_shift_mean",
        "sentiment_shift_median",
        "error",
    ])?;
    for row in &report.rows {
        let mut record = vec![sig17(row.rho)];
        match &row.metrics {
            Some(m) => record.extend([
                m.misinformation.map(sig17).unwrap_or_default(),
                sig17(m.engagement_cost_mean),
                sig17(m.engagement_cost_median),
                sig17(m.sentiment_shift_mean),
                sig17(m.sentiment_shift_median),
            ]),
            None => record.extend(std::iter::repeat_n(String::new(), 5)),
        }
        record.push(row.error.clone().unwrap_or_default());
        wtr.write_record(&record)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::io("<sweep>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes every run directory plus `sweep.csv` and `sweep.json`.
pub fn write_sweep(output_dir: &Path, cfg: &ScenarioConfig, outcome: &SweepOutcome) -> Result<()> {
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let prepared = PreparedScenario::new(cfg.clone())?;
    for (row, run) in outcome.report.rows.iter().zip(&outcome.runs) {
        if let Some(out) = run {
            write_run(output_dir, &prepared, row.rho, out)?;
        }
    }
    write_file(&output_dir.join("sweep.csv"), sweep_csv(&outcome.report)?.as_bytes())?;
    write_file(
        &output_dir.join("sweep.json"),
        (serde_json::to_string_pretty(&outcome.report)? + "\n").as_bytes(),
    )
}
