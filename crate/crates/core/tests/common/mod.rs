//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use misinfo_core::graph::{generate_network_a, NetworkAParams};
use misinfo_core::Network;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exhaustive active-set solution of `min ½uᵀHu + gᵀu` on `[lo, hi]^T`.
///
/// Every variable is pinned low, pinned high or left free; the free block is
/// solved exactly and the best feasible candidate wins. Exponential in the
/// dimension, so only for `T ≤ 8` or so.
pub fn brute_force_box_qp(h: &DMatrix<f64>, g: &DVector<f64>, lo: f64, hi: f64) -> (DVector<f64>, f64) {
    let t = g.len();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for code in 0..3usize.pow(t as u32) {
        let mut state = vec![0u8; t];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mut u = DVector::zeros(t);
        let free: Vec<usize> = (0..t).filter(|&i| state[i] == 2).collect();
        for i in 0..t {
            u[i] = match state[i] {
                0 => lo,
                1 => hi,
                _ => 0.0,
            };
        }
        if !free.is_empty() {
            let k = free.len();
            let hff = DMatrix::from_fn(k, k, |a, b| h[(free[a], free[b])]);
            let rhs = DVector::from_fn(k, |a, _| {
                let i = free[a];
                -g[i] - (0..t).filter(|j| state[*j] != 2).map(|j| h[(i, j)] * u[j]).sum::<f64>()
            });
            let Some(sol) = hff.lu().solve(&rhs) else { continue };
            let tol = 1e-12;
            if sol.iter().any(|&v| v < lo - tol || v > hi + tol) {
                continue;
            }
            for (a, &i) in free.iter().enumerate() {
                u[i] = sol[a].clamp(lo, hi);
            }
        }
        let f = 0.5 * u.dot(&(h * &u)) + g.dot(&u);
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((u, f));
        }
    }
    best.expect("at least the vertex candidates are feasible")
}

pub fn random_spd(r: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| r.random_range(-1.0..1.0));
    &m * m.transpose() + DMatrix::identity(dim, dim) * r.random_range(1e-3..1.0)
}

/// `argmin_u Σ(x_i − u)² + ρ·n·g·u²` over the grid `{0, h, 2h, …, 1}`.
pub fn grid_argmin_mitigation(x: &[f64], rho: f64, novelty: f64, h: f64) -> f64 {
    let n = x.len() as f64;
    let s1: f64 = x.iter().sum();
    let s2: f64 = x.iter().map(|v| v * v).sum();
    let steps = (1.0 / h).round() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=steps {
        let u = k as f64 * h;
        let cost = s2 - 2.0 * u * s1 + n * u * u + rho * n * novelty * u * u;
        if cost < best.0 {
            best = (cost, u);
        }
    }
    best.1
}

/// Random network with the Bernoulli generator and random parameters.
pub fn random_network(r: &mut ChaCha8Rng, n_max: usize) -> Network {
    let lambda_low = r.random_range(0.0..0.5);
    let params = NetworkAParams {
        n: r.random_range(2..=n_max),
        kappa_u: r.random_range(0.05..1.0),
        kappa_r: r.random_range(0.05..1.0),
        lambda_low,
        lambda_high: r.random_range(lambda_low..=1.0),
        beta_alpha: r.random_range(0.5..8.0),
        beta_beta: r.random_range(0.5..8.0),
    };
    generate_network_a(params, r.random()).expect("random parameters are valid")
}
