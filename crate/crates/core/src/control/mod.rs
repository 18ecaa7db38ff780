//! Recommender controllers.
//!
//! The model-free controller minimizes the mitigation cost at the current
//! state in closed form. The model-based controller solves a receding
//! horizon problem over the scalar control sequence, steering towards the
//! best equilibrium of the dynamics.

pub mod qp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::costfn::{content_age, CostParams};
use crate::dynamics::{closed_loop_matrix, SystemMatrices};
use crate::error::{Error, Result};
use crate::State;

pub use qp::{qp_solve_box, QpSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    /// Prediction horizon `T`.
    pub horizon: usize,
    /// Weight of the quadratic penalty `‖x_T − x*‖²` that stands in for a
    /// hard terminal constraint.
    pub terminal_weight: f64,
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 50,
            terminal_weight: 1e3,
            kkt_tolerance: 1e-9,
            max_iterations: 20_000,
        }
    }
}

impl MpcConfig {
    pub fn check(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Domain("MPC horizon must be at least 1".into()));
        }
        if !(self.terminal_weight >= 0.0 && self.terminal_weight.is_finite()) {
            return Err(Error::Domain("terminal weight must be finite and >= 0".into()));
        }
        if self.kkt_tolerance.is_nan() || self.kkt_tolerance <= 0.0 {
            return Err(Error::Domain("KKT tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub x_star: State,
    pub u_star: f64,
}

impl SteadyState {
    /// `‖A·x* + B·u* + Λx(0) − x*‖∞`
    pub fn residual(&self, m: &SystemMatrices) -> f64 {
        (m.affine(&self.x_star, self.u_star) - &self.x_star).amax()
    }
}

/// Model-free control `Σx_i / (n·(1 + ρ·e^(−δ·(t−t_c))))`.
pub fn mf_control(x: &State, t: u64, t_c: u64, params: &CostParams) -> Result<f64> {
    let age = content_age(t, t_c, params)?;
    Ok(mf_control_at_age(x, params, age))
}

pub fn mf_control_at_age(x: &State, params: &CostParams, age: u64) -> f64 {
    let n = x.len() as f64;
    (x.sum() / (n * params.penalty_gain(age))).clamp(0.0, 1.0)
}

/// Equilibrium of the model-free closed loop, by a direct linear solve of
/// `(I − (I−Λ)F)·x* = Λx(0)`.
pub fn mf_steady_state(m: &SystemMatrices, params: &CostParams, age: u64) -> Result<SteadyState> {
    let n = m.n();
    let system = DMatrix::identity(n, n) - closed_loop_matrix(m, params, age);
    let x_star = system
        .lu()
        .solve(&m.anchor)
        .ok_or(Error::Singular("model-free closed loop has no unique equilibrium"))?;
    let u_star = mf_control_at_age(&x_star, params, age);
    Ok(SteadyState { x_star, u_star })
}

/// Response of the equilibrium to a constant control: `x*(u) = v·u + y`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumLine {
    /// `(I − A)⁻¹·B`
    pub v: State,
    /// `(I − A)⁻¹·Λx(0)`
    pub y: State,
}

pub fn equilibrium_line(m: &SystemMatrices) -> Result<EquilibriumLine> {
    let n = m.n();
    let lu = (DMatrix::identity(n, n) - &m.a).lu();
    let v = lu.solve(&m.b).ok_or(Error::Singular("I − A is not invertible"))?;
    let y = lu.solve(&m.anchor).ok_or(Error::Singular("I − A is not invertible"))?;
    Ok(EquilibriumLine { v, y })
}

/// Best equilibrium under the mitigation cost.
///
/// Minimizes `‖(v − 1)·u + y‖² + ρ·n·e^(−δ·age)·u²` over the equilibrium
/// line, clamps the stationary point to `[0, 1]` and maps it back to a
/// state. When the objective is flat along the line (no penalty and
/// `v = 1`), `u* = 0`.
pub fn mb_steady_state(m: &SystemMatrices, params: &CostParams, age: u64) -> Result<SteadyState> {
    let line = equilibrium_line(m)?;
    let n = m.n() as f64;
    let ones = DVector::from_element(m.n(), 1.0);
    let numerator = ones.dot(&line.y) - line.v.dot(&line.y);
    let denominator =
        -ones.dot(&line.v) + n + line.v.dot(&line.v) - line.v.dot(&ones) + params.rho * n * params.decay(age);
    let interior = if denominator > f64::EPSILON * n {
        numerator / denominator
    } else {
        0.0
    };
    let u_star = interior.clamp(0.0, 1.0);
    let x_star = &line.v * u_star + &line.y;
    Ok(SteadyState { x_star, u_star })
}

/// Condensed MPC problem for fixed dynamics, cost and horizon.
///
/// With the predicted states eliminated, `x_k = p_k + Σ_{j<k} h_{k−1−j}·u_j`
/// where `h_m = A^m·B` is the impulse response and `p_k` the free response
/// from the current state. The Hessian only depends on the impulse
/// responses, so it is assembled once and reused for every state.
#[derive(Debug, Clone)]
pub struct CondensedMpc {
    horizon: usize,
    terminal_weight: f64,
    impulse: Vec<State>,
    hessian: DMatrix<f64>,
    cfg: MpcConfig,
}

/// Result of one receding-horizon solve.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcStep {
    /// First element of the optimal control sequence.
    pub u: f64,
    pub sequence: DVector<f64>,
    /// Horizon cost including the terminal penalty.
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

impl CondensedMpc {
    /// `novelty` is the factor `e^(−δ·age)` applied on every predicted step.
    pub fn new(m: &SystemMatrices, rho: f64, novelty: f64, cfg: MpcConfig) -> Result<Self> {
        cfg.check()?;
        let n = m.n();
        let horizon = cfg.horizon;
        let mu = cfg.terminal_weight;

        let mut impulse = Vec::with_capacity(horizon);
        impulse.push(m.b.clone());
        for k in 1..horizon {
            let next = &m.a * &impulse[k - 1];
            impulse.push(next);
        }
        let gram = DMatrix::from_fn(horizon, horizon, |a, b| impulse[a].dot(&impulse[b]));
        let sums: Vec<f64> = impulse.iter().map(|h| h.sum()).collect();

        // Quadratic form uᵀQu; the solver takes H = 2Q.
        let mut q = DMatrix::zeros(horizon, horizon);
        let penalty = rho * n as f64 * novelty;
        for k in 0..horizon {
            for i in 0..k {
                for j in 0..k {
                    q[(i, j)] += gram[(k - 1 - i, k - 1 - j)];
                }
                q[(i, k)] -= sums[k - 1 - i];
                q[(k, i)] -= sums[k - 1 - i];
            }
            q[(k, k)] += n as f64 + penalty;
        }
        for i in 0..horizon {
            for j in 0..horizon {
                q[(i, j)] += mu * gram[(horizon - 1 - i, horizon - 1 - j)];
            }
        }
        Ok(Self {
            horizon,
            terminal_weight: mu,
            impulse,
            hessian: q * 2.0,
            cfg,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    /// Linear term `g` and constant `c` of the objective `½uᵀHu + gᵀu + c`.
    pub fn linear_terms(&self, m: &SystemMatrices, x_now: &State, target: &State) -> (DVector<f64>, f64) {
        let horizon = self.horizon;
        let mut g = DVector::zeros(horizon);
        let mut constant = 0.0;
        let mut free = x_now.clone();
        for k in 0..horizon {
            for i in 0..k {
                g[i] += 2.0 * self.impulse[k - 1 - i].dot(&free);
            }
            g[k] -= 2.0 * free.sum();
            constant += free.norm_squared();
            free = &m.a * &free + &m.anchor;
        }
        let gap = free - target;
        for i in 0..horizon {
            g[i] += 2.0 * self.terminal_weight * self.impulse[horizon - 1 - i].dot(&gap);
        }
        constant += self.terminal_weight * gap.norm_squared();
        (g, constant)
    }

    pub fn solve(
        &self,
        m: &SystemMatrices,
        x_now: &State,
        target: &SteadyState,
        warm_start: Option<&DVector<f64>>,
    ) -> Result<MpcStep> {
        if x_now.len() != m.n() || target.x_star.len() != m.n() {
            return Err(Error::Domain("state dimension does not match the system".into()));
        }
        let (g, constant) = self.linear_terms(m, x_now, &target.x_star);
        let sol = qp::qp_solve_box_from(
            &self.hessian,
            &g,
            0.0,
            1.0,
            self.cfg.kkt_tolerance,
            self.cfg.max_iterations,
            warm_start,
        )?;
        Ok(MpcStep {
            u: sol.u[0].clamp(0.0, 1.0),
            objective: sol.objective + constant,
            iterations: sol.iterations,
            kkt_residual: sol.kkt_residual,
            sequence: sol.u,
        })
    }
}

/// One receding-horizon solve from `x_now`; returns the first control.
///
/// The novelty factor is frozen at the solve-time content age for every
/// predicted step.
pub fn mpc_control(
    m: &SystemMatrices,
    x_now: &State,
    target: &SteadyState,
    t: u64,
    t_c: u64,
    params: &CostParams,
    cfg: &MpcConfig,
) -> Result<MpcStep> {
    let age = content_age(t, t_c, params)?;
    CondensedMpc::new(m, params.rho, params.decay(age), *cfg)?.solve(m, x_now, target, None)
}
