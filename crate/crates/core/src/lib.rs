//! Closed-loop Friedkin-Johnsen sentiment dynamics with a recommender that
//! trades user engagement against exposure to emotionally extreme content.
//!
//! The crate is organized bottom-up:
//!
//! * [`graph`] builds and validates the user network and recommender channel.
//! * [`costfn`] evaluates the engagement cost and its mitigation-penalized form.
//! * [`dynamics`] propagates the state and checks the convergence conditions.
//! * [`control`] holds the model-free and model-based (MPC) controllers.
//! * [`content`] ingests, synthesizes, schedules and selects scored content.
//! * [`metrics`] computes per-run behavioral metrics and Pareto data.
//! * [`harness`] wires everything into scenarios, sweeps and file outputs.

pub mod content;
pub mod control;
pub mod costfn;
pub mod dynamics;
pub mod error;
pub mod fmt;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod rng;

pub use content::{ContentItem, Corpus, CorpusSource, Label};
pub use control::{MpcConfig, QpSolution, SteadyState};
pub use costfn::CostParams;
pub use dynamics::{SystemMatrices, Trajectory};
pub use error::{Error, Result};
pub use graph::{Network, ValidationReport};
pub use harness::{ScenarioConfig, SweepReport};
pub use metrics::RunMetrics;

/// Dense column vector used for user states.
pub type State = nalgebra::DVector<f64>;
