use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::content::SynthesisParams;
use crate::control::MpcConfig;
use crate::costfn::CostParams;
use crate::error::{Error, Result};
use crate::graph::NetworkAParams;

pub const SCHEMA_VERSION: u32 = 1;

/// Documented default seeds for repeated experiments.
pub const DEFAULT_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Penalty grid `[0.0, 5.5]` in steps of `0.1`.
pub const DEFAULT_RHO_GRID: (f64, f64, f64) = (0.0, 5.5, 0.1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    /// Bernoulli random network; the seed defaults to the scenario seed.
    A {
        #[serde(default)]
        params: NetworkAParams,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Fixed six-user network with a radical user.
    B,
    File {
        path: PathBuf,
    },
}

impl NetworkSpec {
    pub fn label(&self) -> &'static str {
        match self {
            NetworkSpec::A { .. } => "a",
            NetworkSpec::B => "b",
            NetworkSpec::File { .. } => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSpec {
    /// Synthetic corpus; the seed defaults to one derived from the scenario seed.
    Synthetic {
        #[serde(default)]
        params: SynthesisParams,
        #[serde(default)]
        seed: Option<u64>,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    /// Model-free with the penalty switched off.
    Baseline,
    Mf,
    Mb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Continuous,
    Discrete,
}

/// Control applied when no content is eligible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyPolicy {
    /// Repeat the previous control (zero before the first step).
    #[default]
    Hold,
    Zero,
}

macro_rules! display_as_serde {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
                f.write_str(v.as_str().unwrap_or_default())
            }
        }
    )*};
}
display_as_serde!(Controller, Mode, EmptyPolicy);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub network: NetworkSpec,
    pub controller: Controller,
    pub mode: Mode,
    pub cost: CostParams,
    #[serde(default)]
    pub mpc: MpcConfig,
    pub tau: u64,
    #[serde(default)]
    pub corpus: Option<CorpusSpec>,
    pub seed: u64,
    #[serde(default)]
    pub empty_policy: EmptyPolicy,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    /// 100-user network, 100 steps, synthetic corpus in discrete mode.
    pub fn network_a(controller: Controller, mode: Mode, rho: f64, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            network: NetworkSpec::A {
                params: NetworkAParams::default(),
                seed: None,
            },
            controller,
            mode,
            cost: CostParams::default().with_rho(rho),
            mpc: MpcConfig::default(),
            tau: 100,
            corpus: (mode == Mode::Discrete).then(|| CorpusSpec::Synthetic {
                params: SynthesisParams::default(),
                seed: None,
            }),
            seed,
            empty_policy: EmptyPolicy::Hold,
            output_dir: None,
        }
    }

    /// Six-user radical network, 50 steps.
    pub fn network_b(controller: Controller, mode: Mode, rho: f64, seed: u64) -> Self {
        Self {
            network: NetworkSpec::B,
            tau: 50,
            ..Self::network_a(controller, mode, rho, seed)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Relative file paths inside a config file are taken relative to it.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let NetworkSpec::File { path } = &mut self.network {
            fix(path);
        }
        if let Some(CorpusSpec::File { path }) = &mut self.corpus {
            fix(path);
        }
        if let Some(dir) = &mut self.output_dir {
            fix(dir);
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.cost.check()?;
        if self.controller == Controller::Mb {
            self.mpc.check()?;
        }
        if self.tau == 0 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        if self.mode == Mode::Discrete && self.corpus.is_none() {
            return Err(Error::Config("discrete mode needs a corpus".into()));
        }
        Ok(())
    }

    /// Cost parameters actually used by the controller.
    pub fn effective_cost(&self, rho: f64) -> CostParams {
        match self.controller {
            Controller::Baseline => self.cost.with_rho(0.0),
            _ => self.cost.with_rho(rho),
        }
    }

    pub fn run_id(&self, rho: f64) -> String {
        format!(
            "{}-{}-{}-rho{:.2}-seed{}",
            self.network.label(),
            self.controller,
            self.mode,
            self.effective_cost(rho).rho,
            self.seed
        )
    }
}
