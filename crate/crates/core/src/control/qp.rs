//! Dense box-constrained convex QP: `min ½uᵀHu + gᵀu` s.t. `lo ≤ u ≤ hi`.
//!
//! Each iteration does a projected-gradient step whose length comes from
//! the Barzilai-Borwein rule, followed by an exact line search along the
//! projected direction. A Newton step restricted to the variables strictly
//! inside the box then refines the iterate; it is truncated at the first
//! bound it hits. Both moves decrease the objective, so the sequence of
//! objective values is non-increasing.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// `‖u − P(u − ∇f(u))‖∞` at the returned point.
    pub kkt_residual: f64,
    /// Objective after every iteration, starting with the projected initial point.
    pub history: Vec<f64>,
}

pub fn objective(h: &DMatrix<f64>, g: &DVector<f64>, u: &DVector<f64>) -> f64 {
    0.5 * u.dot(&(h * u)) + g.dot(u)
}

fn projected_gradient_residual(u: &DVector<f64>, grad: &DVector<f64>, lo: f64, hi: f64) -> f64 {
    u.iter()
        .zip(grad.iter())
        .map(|(&ui, &gi)| (ui - (ui - gi).clamp(lo, hi)).abs())
        .fold(0.0, f64::max)
}

pub fn qp_solve_box(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<QpSolution> {
    qp_solve_box_from(h, g, lo, hi, tol, max_iter, None)
}

/// As [`qp_solve_box`], starting from `start` (projected onto the box) when given.
pub fn qp_solve_box_from(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
    start: Option<&DVector<f64>>,
) -> Result<QpSolution> {
    let dim = g.len();
    if h.nrows() != dim || h.ncols() != dim {
        return Err(Error::Domain(format!(
            "hessian is {}x{}, gradient has {dim} entries",
            h.nrows(),
            h.ncols()
        )));
    }
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::Domain(format!("empty box [{lo}, {hi}]")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain("tolerance must be positive".into()));
    }

    let mut u = match start {
        Some(s) if s.len() == dim => s.map(|v| v.clamp(lo, hi)),
        _ => DVector::from_element(dim, lo.max(0.0_f64.min(hi))),
    };
    let mut grad = h * &u + g;
    let mut value = objective(h, g, &u);
    let mut history = vec![value];
    // Initial step from the largest diagonal entry, a cheap bound on ‖H‖.
    let mut alpha = 1.0 / h.diagonal().amax().max(f64::MIN_POSITIVE);

    for iter in 0..max_iter {
        let residual = projected_gradient_residual(&u, &grad, lo, hi);
        if residual <= tol {
            return Ok(QpSolution {
                u,
                objective: value,
                iterations: iter,
                kkt_residual: residual,
                history,
            });
        }

        // Projected gradient step with exact line search on [0, 1].
        let trial = (&u - &grad * alpha).map(|v| v.clamp(lo, hi));
        let dir = &trial - &u;
        let hdir = h * &dir;
        let slope = grad.dot(&dir);
        let curvature = dir.dot(&hdir);
        if slope < 0.0 {
            let t = if curvature > 0.0 {
                (-slope / curvature).min(1.0)
            } else {
                1.0
            };
            let s = &dir * t;
            let y = &hdir * t;
            let next = if t == 1.0 {
                trial
            } else {
                (&u + &s).map(|v| v.clamp(lo, hi))
            };
            let next_value = objective(h, g, &next);
            if next_value <= value {
                u = next;
                value = next_value;
                grad = h * &u + g;
                let sy = s.dot(&y);
                alpha = if sy > 0.0 {
                    (s.dot(&s) / sy).clamp(1e-12, 1e12)
                } else {
                    alpha
                };
            }
        }

        newton_on_free_set(h, g, lo, hi, &mut u, &mut grad, &mut value);
        history.push(value);
    }

    let residual = projected_gradient_residual(&u, &grad, lo, hi);
    if residual <= tol {
        Ok(QpSolution {
            u,
            objective: value,
            iterations: max_iter,
            kkt_residual: residual,
            history,
        })
    } else {
        Err(Error::NotConverged {
            iterations: max_iter,
            residual,
        })
    }
}

/// Newton step on the variables strictly inside the box, holding the
/// others fixed, truncated at the first bound crossing.
fn newton_on_free_set(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    lo: f64,
    hi: f64,
    u: &mut DVector<f64>,
    grad: &mut DVector<f64>,
    value: &mut f64,
) {
    let free: Vec<usize> = (0..u.len()).filter(|&i| lo < u[i] && u[i] < hi).collect();
    if free.is_empty() {
        return;
    }
    let k = free.len();
    let h_ff = DMatrix::from_fn(k, k, |a, b| h[(free[a], free[b])]);
    let g_f = DVector::from_fn(k, |a, _| grad[free[a]]);
    let Some(chol) = h_ff.cholesky() else {
        return;
    };
    let step = -chol.solve(&g_f);

    let mut t = 1.0_f64;
    for (a, &i) in free.iter().enumerate() {
        let d = step[a];
        if d > 0.0 {
            t = t.min((hi - u[i]) / d);
        } else if d < 0.0 {
            t = t.min((lo - u[i]) / d);
        }
    }
    if t.is_nan() || t <= 0.0 {
        return;
    }
    let mut next = u.clone();
    for (a, &i) in free.iter().enumerate() {
        next[i] = (u[i] + t * step[a]).clamp(lo, hi);
    }
    let next_value = objective(h, g, &next);
    if next_value <= *value {
        *u = next;
        *grad = h * &*u + g;
        *value = next_value;
    }
}
