//! Engagement cost and the mitigation-penalized cost.
//!
//! `θ(x, u) = Σ_i (x_i − u)²` measures how far a recommendation sits from
//! the users. The mitigation cost adds `ρ·n·u²·e^(−δ·age)`, which penalizes
//! emotionally extreme content more strongly while it is new.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Penalty strength.
    pub rho: f64,
    /// Novelty decay rate.
    #[serde(default)]
    pub delta_novelty: f64,
    /// Number of steps a content item stays eligible after creation.
    #[serde(default = "default_window")]
    pub window_z: u64,
}

fn default_window() -> u64 {
    5
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            rho: 0.0,
            delta_novelty: 0.0,
            window_z: default_window(),
        }
    }
}

impl CostParams {
    pub fn new(rho: f64, delta_novelty: f64, window_z: u64) -> Result<Self> {
        let p = Self {
            rho,
            delta_novelty,
            window_z,
        };
        p.check()?;
        Ok(p)
    }

    pub fn with_rho(self, rho: f64) -> Self {
        Self { rho, ..self }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::Domain(format!("rho must be finite and >= 0, got {}", self.rho)));
        }
        if !(self.delta_novelty >= 0.0 && self.delta_novelty.is_finite()) {
            return Err(Error::Domain(format!(
                "novelty decay must be finite and >= 0, got {}",
                self.delta_novelty
            )));
        }
        if self.window_z == 0 {
            return Err(Error::Domain("content window must be at least 1".into()));
        }
        Ok(())
    }

    /// `e^(−δ·age)` without the window check.
    pub fn decay(&self, age: u64) -> f64 {
        (-self.delta_novelty * age as f64).exp()
    }

    /// Penalty multiplier `1 + ρ·e^(−δ·age)` shared by the closed forms.
    pub fn penalty_gain(&self, age: u64) -> f64 {
        1.0 + self.rho * self.decay(age)
    }
}

fn check_control(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::Domain(format!("control {u} outside [0, 1]")))
    }
}

pub fn engagement_cost(x: &[f64], u: f64) -> Result<f64> {
    check_control(u)?;
    Ok(x.iter().map(|&xi| (xi - u) * (xi - u)).sum())
}

/// Content age `t − t_c`, rejecting content from the future or past the window.
pub fn content_age(t: u64, t_c: u64, params: &CostParams) -> Result<u64> {
    match t.checked_sub(t_c) {
        Some(age) if age <= params.window_z => Ok(age),
        _ => Err(Error::OutOfWindow {
            t,
            t_c,
            window: params.window_z,
        }),
    }
}

pub fn novelty_factor(t: u64, t_c: u64, params: &CostParams) -> Result<f64> {
    Ok(params.decay(content_age(t, t_c, params)?))
}

pub fn mitigation_cost(x: &[f64], u: f64, t: u64, t_c: u64, params: &CostParams) -> Result<f64> {
    let novelty = novelty_factor(t, t_c, params)?;
    mitigation_cost_at(x, u, novelty, params.rho)
}

/// Mitigation cost with a precomputed novelty factor.
pub fn mitigation_cost_at(x: &[f64], u: f64, novelty: f64, rho: f64) -> Result<f64> {
    let n = x.len() as f64;
    Ok(engagement_cost(x, u)? + rho * n * u * u * novelty)
}
