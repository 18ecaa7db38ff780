use serde::Serialize;

use crate::content::CorpusStats;
use crate::dynamics::{build_matrices, h_matrix_min_eigenvalue, spectral_radius_check};
use crate::error::Result;
use crate::graph::{self, ValidationReport};

use super::{load_corpus, load_network, Controller, Mode, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioValidation {
    pub network: ValidationReport,
    /// `(rho, content age, radius)` for each checked combination.
    pub spectral_radius: Vec<(f64, u64, f64)>,
    pub corpus: Option<CorpusStats>,
    pub findings: Vec<Finding>,
}

impl ScenarioValidation {
    /// No warnings and no errors.
    pub fn is_clean(&self) -> bool {
        self.findings.iter().all(|f| f.severity == Severity::Info)
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    fn push(&mut self, severity: Severity, message: String) {
        self.findings.push(Finding { severity, message });
    }
}

/// Checks a scenario before running it.
///
/// `rho_range` gives the sweep endpoints to check; without it only the
/// configured penalty is checked. Returns `Err` only when inputs cannot be
/// loaded at all; every other problem is a finding.
pub fn validate_scenario(cfg: &ScenarioConfig, rho_range: Option<(f64, f64)>) -> Result<ScenarioValidation> {
    let network = load_network(&cfg.network, cfg.seed)?;
    let mut out = ScenarioValidation {
        network: graph::validate(&network),
        spectral_radius: Vec::new(),
        corpus: None,
        findings: Vec::new(),
    };
    if let Err(e) = cfg.check() {
        out.push(Severity::Error, e.to_string());
    }
    for v in &out.network.violations.clone() {
        out.push(Severity::Error, format!("network: {v:?}"));
    }
    if !out.network.is_clean() {
        return Ok(out);
    }

    let m = build_matrices(&network);
    let mut rhos = match rho_range {
        Some((lo, hi)) => vec![lo, hi],
        None => vec![cfg.cost.rho],
    };
    if cfg.controller == Controller::Baseline {
        rhos = vec![0.0];
    }
    rhos.dedup();
    // The penalty is weakest for the oldest admissible content.
    let ages: Vec<u64> = if cfg.cost.delta_novelty > 0.0 {
        vec![0, cfg.cost.window_z]
    } else {
        vec![0]
    };
    for &rho in &rhos {
        let cost = cfg.cost.with_rho(rho);
        if let Err(e) = cost.check() {
            out.push(Severity::Error, e.to_string());
            continue;
        }
        for &age in &ages {
            match spectral_radius_check(&m, &cost, age) {
                Ok(r) => {
                    out.spectral_radius.push((rho, age, r));
                    if r >= 1.0 {
                        out.push(
                            Severity::Warning,
                            format!("closed-loop spectral radius {r} >= 1 at rho={rho}, age={age}"),
                        );
                    }
                }
                Err(e) => out.push(Severity::Warning, format!("spectral radius at rho={rho}: {e}")),
            }
            let lambda_min = h_matrix_min_eigenvalue(network.n(), rho, cost.delta_novelty, age);
            if rho == 0.0 {
                out.push(
                    Severity::Info,
                    "rho=0: cost Hessian is positive semidefinite only; the optimal control may not be unique".into(),
                );
            } else if lambda_min <= 0.0 {
                out.push(
                    Severity::Error,
                    format!(
                        "cost Hessian is not positive definite at rho={rho}, age={age} (min eigenvalue {lambda_min})"
                    ),
                );
            }
        }
    }

    if cfg.mode == Mode::Discrete {
        if let Some(spec) = &cfg.corpus {
            let corpus = load_corpus(spec, cfg.tau, cfg.seed)?;
            let stats = corpus.stats();
            match (stats.false_mean, stats.true_mean) {
                (Some(f), Some(t)) if f <= t => out.push(
                    Severity::Warning,
                    format!("false content is not more extreme than true content (means {f} vs {t})"),
                ),
                (None, _) | (_, None) => out.push(Severity::Warning, "corpus lacks one of the two labels".into()),
                _ => {}
            }
            out.corpus = Some(stats);
        }
    }
    Ok(out)
}
