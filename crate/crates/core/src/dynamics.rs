//! State propagation `x(t+1) = A·x(t) + B·u(t) + Λ·x(0)` and the numerical
//! convergence checks that go with it.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::costfn::CostParams;
use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::graph::Network;
use crate::State;

/// Rounding slack accepted on states before they count as leaving `[0, 1]`.
pub const STATE_SLACK: f64 = 1e-9;

/// Relative tolerance of the spectral-radius power iteration.
pub const POWER_ITERATION_TOLERANCE: f64 = 1e-10;
pub const POWER_ITERATION_CAP: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    /// `(I − Λ)·W`
    pub a: DMatrix<f64>,
    /// `(I − Λ)·w_rec`
    pub b: DVector<f64>,
    /// `Λ·x(0)`
    pub anchor: DVector<f64>,
}

impl SystemMatrices {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    /// Affine map without domain checks or clamping.
    pub fn affine(&self, x: &State, u: f64) -> State {
        let mut next = &self.a * x;
        next.axpy(u, &self.b, 1.0);
        next += &self.anchor;
        next
    }
}

pub fn build_matrices(net: &Network) -> SystemMatrices {
    let keep = net.lambda.map(|l| 1.0 - l);
    let mut a = net.w.clone();
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row *= keep[i];
    }
    SystemMatrices {
        a,
        b: net.w_rec.component_mul(&keep),
        anchor: net.lambda.component_mul(&net.x0),
    }
}

fn check_state(x: &State, what: &str) -> Result<()> {
    match x.iter().position(|v| !(-STATE_SLACK..=1.0 + STATE_SLACK).contains(v)) {
        None => Ok(()),
        Some(i) => Err(Error::Domain(format!("{what} entry {i} = {} outside [0, 1]", x[i]))),
    }
}

/// One step of the dynamics.
///
/// Inputs must lie in the unit box. The affine map keeps the state in the
/// box for any valid network; the result is clamped to remove rounding
/// noise, and anything further out than [`STATE_SLACK`] is reported as a
/// domain error.
pub fn step(m: &SystemMatrices, x: &State, u: f64) -> Result<State> {
    if x.len() != m.n() {
        return Err(Error::Domain(format!(
            "state has {} entries, system has {}",
            x.len(),
            m.n()
        )));
    }
    check_state(x, "state")?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("control {u} outside [0, 1]")));
    }
    let next = m.affine(x, u);
    check_state(&next, "next state")?;
    Ok(next.map(|v| v.clamp(0.0, 1.0)))
}

/// Recorded closed-loop run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    /// `x(0), …, x(τ)`
    pub states: Vec<State>,
    /// `u(0), …, u(τ−1)`
    pub controls: Vec<f64>,
    /// Content shown at each step; `None` in continuous mode or when nothing was eligible.
    pub content_ids: Vec<Option<String>>,
    /// Continuous controller output before any discrete content mapping.
    pub targets: Vec<f64>,
}

impl Trajectory {
    pub fn new(x0: State) -> Self {
        Self {
            states: vec![x0],
            ..Self::default()
        }
    }

    pub fn push(&mut self, u: f64, target: f64, content_id: Option<String>, next: State) {
        self.controls.push(u);
        self.targets.push(target);
        self.content_ids.push(content_id);
        self.states.push(next);
    }

    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn last_state(&self) -> &State {
        self.states.last().expect("trajectory holds at least x(0)")
    }

    /// Writes the trajectory as CSV, one row per time step `0..=τ`.
    ///
    /// Columns are `t,u,content_id,x_mean,x_std,x_0,…,x_{n−1}`; `x_std` is
    /// the population standard deviation. The final row has no control.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.states.first().map_or(0, |x| x.len());
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec![
            "t".to_string(),
            "u".into(),
            "content_id".into(),
            "x_mean".into(),
            "x_std".into(),
        ];
        header.extend((0..n).map(|i| format!("x_{i}")));
        wtr.write_record(&header)?;
        for (t, x) in self.states.iter().enumerate() {
            let mean = x.mean();
            let std = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
            let mut row = Vec::with_capacity(n + 5);
            row.push(t.to_string());
            row.push(self.controls.get(t).map(|&u| sig17(u)).unwrap_or_default());
            row.push(self.content_ids.get(t).cloned().flatten().unwrap_or_default());
            row.push(sig17(mean));
            row.push(sig17(std));
            row.extend(x.iter().map(|&v| sig17(v)));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("<trajectory>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Closed-loop matrix `(I − Λ)·F = A + B·1ᵀ / (n·(1 + ρ·e^(−δ·age)))` of the
/// model-free controller.
pub fn closed_loop_matrix(m: &SystemMatrices, cost: &CostParams, age: u64) -> DMatrix<f64> {
    let n = m.n();
    let coupling = 1.0 / (n as f64 * cost.penalty_gain(age));
    let mut f = m.a.clone();
    for i in 0..n {
        let add = m.b[i] * coupling;
        for j in 0..n {
            f[(i, j)] += add;
        }
    }
    f
}

/// Spectral radius of the model-free closed-loop matrix.
///
/// Power iteration on `M + I` from the all-ones vector. For a nonnegative
/// `M` the shifted matrix has Perron root `ρ(M) + 1` and no other
/// eigenvalue of equal modulus when `M` is irreducible, which keeps the
/// iteration from cycling on periodic graphs.
pub fn spectral_radius_check(m: &SystemMatrices, cost: &CostParams, content_age: u64) -> Result<f64> {
    let n = m.n();
    let coupling = 1.0 / (n as f64 * cost.penalty_gain(content_age));
    let mut x = DVector::from_element(n, 1.0);
    let mut estimate = f64::NAN;
    for _ in 0..POWER_ITERATION_CAP {
        let mut y = &m.a * &x;
        y.axpy(x.sum() * coupling, &m.b, 1.0);
        y += &x;
        let norm = y.amax();
        let converged = (norm - estimate).abs() <= POWER_ITERATION_TOLERANCE * norm;
        estimate = norm;
        x = y / norm;
        if converged {
            return Ok(estimate - 1.0);
        }
    }
    Err(Error::PowerIteration {
        iterations: POWER_ITERATION_CAP,
        estimate: estimate - 1.0,
    })
}

/// Minimum eigenvalue of `H = [[I_n, −1_n], [−1_nᵀ, n·(1 + ρ·e^(−δ·age))]]`.
///
/// `H` acts as the identity on vectors `(v, 0)` with `v ⟂ 1`; on the span
/// of `(1/√n, 0)` and `(0, 1)` it reduces to `[[1, −√n], [−√n, c]]`, whose
/// determinant `c − n = n·ρ·e^(−δ·age)` is the Schur complement.
pub fn h_matrix_min_eigenvalue(n: usize, rho: f64, delta_novelty: f64, age: u64) -> f64 {
    let nf = n as f64;
    let penalty = rho * (-delta_novelty * age as f64).exp();
    let c = nf * (1.0 + penalty);
    let trace = 1.0 + c;
    let disc = ((c - 1.0) * (c - 1.0) + 4.0 * nf).sqrt();
    let largest = 0.5 * (trace + disc);
    // det / largest avoids cancellation in (trace − disc) / 2.
    let smallest = nf * penalty / largest;
    if n > 1 {
        smallest.min(1.0)
    } else {
        smallest
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_network_a, NetworkAParams, NetworkMeta};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn meta() -> NetworkMeta {
        NetworkMeta {
            generator: "test".into(),
            seed: None,
            params: Default::default(),
        }
    }

    fn scalar_net() -> Network {
        Network::from_parts(
            DMatrix::zeros(1, 1),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 0.5),
            DVector::from_element(1, 1.0),
            meta(),
        )
        .unwrap()
    }

    /// Random valid network: random substochastic rows, random stubbornness.
    pub(crate) fn random_net(rng: &mut impl Rng, n: usize) -> Network {
        let mut w = DMatrix::zeros(n, n);
        let mut w_rec = DVector::zeros(n);
        for i in 0..n {
            let mut raw: Vec<f64> = (0..=n)
                .map(|j| if j == i { 0.0 } else { rng.random::<f64>() })
                .collect();
            let total: f64 = raw.iter().sum();
            let mass = if rng.random_bool(0.5) { 1.0 } else { rng.random::<f64>() };
            raw.iter_mut().for_each(|v| *v *= mass / total);
            for j in 0..n {
                w[(i, j)] = raw[j];
            }
            w_rec[i] = raw[n];
        }
        let lambda = DVector::from_fn(n, |_, _| rng.random::<f64>());
        let x0 = DVector::from_fn(n, |_, _| rng.random::<f64>());
        Network::from_parts(w, w_rec, lambda, x0, meta()).unwrap()
    }

    #[test]
    fn matrices_for_scalar_system() {
        let m = build_matrices(&scalar_net());
        assert_eq!(m.a[(0, 0)], 0.0);
        assert_eq!(m.b[0], 0.5);
        assert_eq!(m.anchor[0], 0.5);
        assert_eq!(step(&m, &DVector::from_element(1, 0.0), 1.0).unwrap()[0], 1.0);
    }

    #[test]
    fn fully_stubborn_user_ignores_influence() {
        let mut net = generate_network_a(
            NetworkAParams {
                n: 8,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        net.lambda[3] = 1.0;
        let m = build_matrices(&net);
        assert!(m.a.row(3).iter().all(|&v| v == 0.0));
        assert_eq!(m.b[3], 0.0);

        net.lambda.fill(1.0);
        let m = build_matrices(&net);
        let x = DVector::from_element(8, 0.123);
        assert_eq!(step(&m, &x, 0.0).unwrap(), net.x0);
    }

    #[test]
    fn zero_stubbornness_is_identity_on_influence() {
        let mut net = generate_network_a(
            NetworkAParams {
                n: 8,
                ..Default::default()
            },
            4,
        )
        .unwrap();
        net.lambda.fill(0.0);
        let m = build_matrices(&net);
        assert_eq!(m.a, net.w);
        assert_eq!(m.b, net.w_rec);
        assert!(m.anchor.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_rejects_out_of_box_inputs() {
        let m = build_matrices(&scalar_net());
        assert!(step(&m, &DVector::from_element(1, 1.5), 0.5).is_err());
        assert!(step(&m, &DVector::from_element(1, 0.5), -0.5).is_err());
        assert!(step(&m, &DVector::from_element(2, 0.5), 0.5).is_err());
    }

    #[test]
    fn spectral_radius_examples() {
        let m = build_matrices(&scalar_net());
        let r = spectral_radius_check(&m, &CostParams::default(), 0).unwrap();
        assert_relative_eq!(r, 0.5, epsilon = 1e-12);

        let net = generate_network_a(NetworkAParams::default(), 1).unwrap();
        let m = build_matrices(&net);
        let r = spectral_radius_check(&m, &CostParams::default(), 0).unwrap();
        let lambda_min = net.lambda.min();
        assert!(r < 1.0 && r <= 1.0 - lambda_min + 1e-9, "radius {r}");
    }

    #[test]
    fn spectral_radius_handles_periodic_graph() {
        // Directed 3-cycle without recommender: a permutation matrix scaled by 0.9.
        let mut w = DMatrix::zeros(3, 3);
        for i in 0..3 {
            w[(i, (i + 1) % 3)] = 1.0;
        }
        let net = Network::from_parts(
            w,
            DVector::zeros(3),
            DVector::from_element(3, 0.1),
            DVector::from_row_slice(&[0.9, 0.1, 0.5]),
            meta(),
        )
        .unwrap();
        let r = spectral_radius_check(&build_matrices(&net), &CostParams::default(), 0).unwrap();
        assert_relative_eq!(r, 0.9, epsilon = 1e-8);
    }

    #[test]
    fn spectral_radius_matches_eigen_solver() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.random_range(2..12);
            let net = random_net(&mut rng, n);
            let m = build_matrices(&net);
            let cost = CostParams::new(rng.random_range(0.0..3.0), 0.0, 5).unwrap();
            let r = spectral_radius_check(&m, &cost, 0).unwrap();
            let full = closed_loop_matrix(&m, &cost, 0);
            let oracle = full.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!((r - oracle).abs() <= 1e-7 * oracle.max(1e-3), "{r} vs {oracle}");
        }
    }

    #[test]
    fn h_matrix_examples() {
        assert!(h_matrix_min_eigenvalue(100, 0.0, 0.0, 0).abs() <= 1e-12);
        assert!(h_matrix_min_eigenvalue(100, 2.5, 0.0, 0) > 0.0);
        assert_relative_eq!(
            h_matrix_min_eigenvalue(1, 1.0, 0.0, 0),
            (3.0 - 5f64.sqrt()) / 2.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(h_matrix_min_eigenvalue(1, 1.0, 0.0, 0), 0.38197, epsilon = 1e-5);
    }

    fn h_oracle(n: usize, rho: f64, delta: f64, age: u64) -> f64 {
        let c = n as f64 * (1.0 + rho * (-delta * age as f64).exp());
        let h = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => f64::from(u8::from(i == j)),
            (true, false) | (false, true) => -1.0,
            (false, false) => c,
        });
        h.symmetric_eigenvalues().min()
    }

    #[test]
    fn h_matrix_matches_eigen_solver() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..40);
            let rho = if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random_range(0.0..6.0)
            };
            let delta = rng.random_range(0.0..1.0);
            let age = rng.random_range(0..=5);
            let got = h_matrix_min_eigenvalue(n, rho, delta, age);
            let want = h_oracle(n, rho, delta, age);
            assert!((got - want).abs() <= 1e-9, "n={n} rho={rho}: {got} vs {want}");
            if rho > 0.0 {
                assert!(got > 0.0);
            } else {
                assert!(got.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let m = build_matrices(&scalar_net());
        let mut traj = Trajectory::new(DVector::from_element(1, 0.0));
        let next = step(&m, traj.last_state(), 1.0).unwrap();
        traj.push(1.0, 1.0, Some("c7".into()), next);
        let text = traj.to_csv_string().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,u,content_id,x_mean,x_std,x_0");
        assert_eq!(
            lines[1],
            "0,1.0000000000000000e0,c7,0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0"
        );
        assert_eq!(
            lines[2],
            "1,,,1.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0"
        );
    }

    proptest! {
        #[test]
        fn step_is_affine(
            seed in any::<u64>(), n in 1usize..12,
            alpha in 0.0..=1.0f64, u1 in 0.0..=1.0f64, u2 in 0.0..=1.0f64,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = build_matrices(&random_net(&mut rng, n));
            let x1 = DVector::from_fn(n, |_, _| rng.random::<f64>());
            let x2 = DVector::from_fn(n, |_, _| rng.random::<f64>());
            let mixed = step(&m, &(&x1 * alpha + &x2 * (1.0 - alpha)), alpha * u1 + (1.0 - alpha) * u2).unwrap();
            let split = step(&m, &x1, u1).unwrap() * alpha + step(&m, &x2, u2).unwrap() * (1.0 - alpha);
            prop_assert!((mixed - split).amax() <= 1e-12);
        }
    }
}
