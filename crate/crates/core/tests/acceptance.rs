//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::Instant;

use misinfo_core::control::{mb_steady_state, mf_control, mf_steady_state, qp_solve_box, CondensedMpc, MpcConfig};
use misinfo_core::costfn::{mitigation_cost_at, CostParams};
use misinfo_core::dynamics::{build_matrices, h_matrix_min_eigenvalue, step};
use misinfo_core::graph::{generate_network_a, NetworkAParams, NETWORK_B_RADICAL};
use misinfo_core::harness::{
    run_sweep, sweep_csv, write_run, Controller, CorpusSpec, Mode, PreparedScenario, DEFAULT_SEEDS,
};
use misinfo_core::ScenarioConfig;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use common::{brute_force_box_qp, grid_argmin_mitigation, random_network, random_spd, rng};

/// Shipped default seed for single-seed checks.
const DEFAULT_SEED: u64 = 1;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

fn criterion_1() -> Outcome {
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for case in 0..500 {
        let n = [3, 10, 100][case % 3];
        let rho = [0.0, 1.0, 2.5][r.random_range(0..3)];
        let delta = [0.0, 0.5][r.random_range(0..2)];
        let age: u64 = r.random_range(0..=5);
        let x = DVector::from_fn(n, |_, _| r.random::<f64>());
        let params = CostParams::new(rho, delta, 5).unwrap();
        let u = mf_control(&x, age + 3, 3, &params).unwrap();
        let oracle = grid_argmin_mitigation(x.as_slice(), rho, (-delta * age as f64).exp(), 1e-5);
        worst = worst.max((u - oracle).abs());
    }
    outcome(
        worst <= 1e-3,
        format!("max |u_mf - grid argmin| = {worst:.3e} over 500 cases (tol 1e-3)"),
    )
}

fn criterion_2() -> Outcome {
    let net = generate_network_a(NetworkAParams::default(), DEFAULT_SEED).unwrap();
    let m = build_matrices(&net);
    let mut pass = true;
    let mut parts = Vec::new();
    for rho in [0.5, 2.5] {
        let params = CostParams::new(rho, 0.0, 5).unwrap();
        let target = mf_steady_state(&m, &params, 0).unwrap();
        let mut x = net.x0.clone();
        let mut max_residual = 0.0f64;
        for t in 0..100 {
            let u = mf_control(&x, t, t, &params).unwrap();
            let next = step(&m, &x, u).unwrap();
            // Recursion written out independently of the step function.
            let n = x.len() as f64;
            let expected = &m.a * &x + &m.b * (x.sum() / (n * (1.0 + rho))) + &m.anchor;
            max_residual = max_residual.max(inf_norm(&(&next - expected)));
            x = next;
        }
        let err = inf_norm(&(&x - &target.x_star));
        pass &= err <= 1e-6 && max_residual <= 1e-12;
        parts.push(format!(
            "rho={rho}: |x(100)-x*|inf={err:.3e}, recursion residual={max_residual:.1e}"
        ));
    }
    outcome(pass, format!("{} (tol 1e-6 / 1e-12)", parts.join("; ")))
}

fn criterion_3() -> Outcome {
    let mut r = rng(303);
    let (mut worst_residual, mut worst_gap) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..100 {
        let net = random_network(&mut r, 40);
        let m = build_matrices(&net);
        let params = CostParams::new(r.random_range(0.0..5.5), 0.0, 5).unwrap();
        let mb = mb_steady_state(&m, &params, 0).unwrap();
        let mf = mf_steady_state(&m, &params, 0).unwrap();
        let fixed_point = &m.a * &mb.x_star + &m.b * mb.u_star + &m.anchor;
        worst_residual = worst_residual.max(inf_norm(&(fixed_point - &mb.x_star)));
        let cost =
            |s: &misinfo_core::SteadyState| mitigation_cost_at(s.x_star.as_slice(), s.u_star, 1.0, params.rho).unwrap();
        worst_gap = worst_gap.max(cost(&mb) - cost(&mf));
    }
    outcome(
        worst_residual <= 1e-10 && worst_gap <= 1e-9,
        format!("max fixed-point residual {worst_residual:.2e} (tol 1e-10), max theta_M(MB)-theta_M(MF) {worst_gap:.2e} (tol 1e-9)"),
    )
}

fn criterion_4() -> Outcome {
    let mut r = rng(404);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let dim = r.random_range(1..=8);
        let h = random_spd(&mut r, dim);
        let g = DVector::from_fn(dim, |_, _| r.random_range(-4.0..4.0));
        let sol = qp_solve_box(&h, &g, 0.0, 1.0, 1e-12, 100_000).unwrap();
        let (_, oracle) = brute_force_box_qp(&h, &g, 0.0, 1.0);
        worst = worst.max((sol.objective - oracle).abs());
    }
    outcome(
        worst <= 1e-8,
        format!("max |objective - exhaustive oracle| = {worst:.2e} over 200 instances (tol 1e-8)"),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let net = generate_network_a(NetworkAParams::default(), DEFAULT_SEED).unwrap();
    let m = build_matrices(&net);
    let params = CostParams::new(2.5, 0.0, 5).unwrap();
    let cfg = MpcConfig {
        horizon: 50,
        terminal_weight: 1e3,
        ..MpcConfig::default()
    };
    let target = mb_steady_state(&m, &params, 0).unwrap();
    let mpc = CondensedMpc::new(&m, params.rho, 1.0, cfg).unwrap();
    let mut x = net.x0.clone();
    let mut first_hit = None;
    for t in 0..100u64 {
        let u = mpc.solve(&m, &x, &target, None).unwrap().u;
        x = step(&m, &x, u).unwrap();
        if first_hit.is_none() && inf_norm(&(&x - &target.x_star)) <= 1e-3 {
            first_hit = Some(t + 1);
        }
    }
    let err = inf_norm(&(&x - &target.x_star));
    let u_at_star = mpc.solve(&m, &target.x_star, &target, None).unwrap().u;
    let du = (u_at_star - target.u_star).abs();
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        err <= 1e-3 && du <= 1e-3 && elapsed < 30.0,
        format!(
            "|x(100)-x*_MB|inf={err:.3e} (tol 1e-3, first hit {first_hit:?}), |u(x*)-u*|={du:.3e} (tol 1e-3), {elapsed:.1}s"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut r = rng(606);
    let (mut min_positive, mut worst_zero) = (f64::INFINITY, 0.0f64);
    for case in 0..200 {
        let n = r.random_range(1..=40);
        let rho = if case < 100 { r.random_range(1e-3..5.5) } else { 0.0 };
        let delta = r.random_range(0.0..1.0);
        let age = r.random_range(0..=5u64);
        let c = n as f64 * (1.0 + rho * (-delta * age as f64).exp());
        let h = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i == n, j == n) {
            (false, false) => f64::from(i == j),
            (true, true) => c,
            _ => -1.0,
        });
        let eig = SymmetricEigen::new(h).eigenvalues.min();
        let closed = h_matrix_min_eigenvalue(n, rho, delta, age);
        assert!(
            (eig - closed).abs() <= 1e-9 * (1.0 + c),
            "closed form disagrees with eigensolver"
        );
        if rho > 0.0 {
            min_positive = min_positive.min(eig);
        } else {
            worst_zero = worst_zero.max(eig.abs());
        }
    }
    outcome(
        min_positive > 0.0 && worst_zero <= 1e-12,
        format!("min eigenvalue for rho>0: {min_positive:.3e} (> 0); max |min eigenvalue| at rho=0: {worst_zero:.2e} (tol 1e-12)"),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut passing = 0;
    let mut per_seed = Vec::new();
    for &seed in &DEFAULT_SEEDS {
        let cfg = ScenarioConfig::network_a(Controller::Mf, Mode::Discrete, 0.0, seed);
        let sweep = run_sweep(&cfg, 0.0, 2.5, 0.5, 6).unwrap();
        let m: Vec<f64> = sweep
            .report
            .rows
            .iter()
            .map(|row| row.metrics.as_ref().unwrap().misinformation.unwrap())
            .collect();
        let (m0, m25) = (m[0], m[m.len() - 1]);
        if m25 <= 0.5 * m0 {
            passing += 1;
        }
        per_seed.push(format!("{seed}:{m0:.3}->{m25:.3}"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let mut detail = format!(
        "M(2.5) <= 0.5*M(0) for {passing}/10 seeds (need 8) [{}], {elapsed:.1}s",
        per_seed.join(" ")
    );
    if let Some(reduction) = scored_corpus_reduction() {
        detail.push_str(&format!("; supplied corpus: {reduction}"));
    }
    outcome(passing >= 8 && elapsed < 120.0, detail)
}

/// Reduction measured on a user-supplied scored corpus (`MISINFO_SCORED_CORPUS`),
/// reported next to the published 76% without asserting it.
fn scored_corpus_reduction() -> Option<String> {
    let path = std::env::var_os("MISINFO_SCORED_CORPUS")?;
    let mut cfg = ScenarioConfig::network_a(Controller::Mf, Mode::Discrete, 0.0, DEFAULT_SEED);
    cfg.corpus = Some(CorpusSpec::File { path: path.into() });
    let report = match run_sweep(&cfg, 0.0, 2.5, 2.5, 2) {
        Ok(sweep) => sweep.report,
        Err(e) => return Some(format!("could not run ({e})")),
    };
    let m: Vec<Option<f64>> = report
        .rows
        .iter()
        .map(|r| r.metrics.as_ref().and_then(|m| m.misinformation))
        .collect();
    Some(match (m[0], m[1]) {
        (Some(m0), Some(m25)) if m0 > 0.0 => format!(
            "measured reduction {:.1}% (published figure 76%, not asserted)",
            100.0 * (1.0 - m25 / m0)
        ),
        _ => "misinformation ratio undefined".into(),
    })
}

fn criterion_8() -> Outcome {
    let (mut pinned, mut lower, mut median_stable) = (true, 0, 0);
    for &seed in &DEFAULT_SEEDS {
        let cfg = ScenarioConfig::network_b(Controller::Mf, Mode::Discrete, 0.0, seed);
        let prepared = PreparedScenario::new(cfg).unwrap();
        let r0 = prepared.run(0.0).unwrap();
        let r1 = prepared.run(1.0).unwrap();
        for out in [&r0, &r1] {
            pinned &= out.trajectory.states.iter().all(|x| x[NETWORK_B_RADICAL] == 1.0);
        }
        let non_radical_mean = |x: &DVector<f64>| {
            let (sum, count) = x
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != NETWORK_B_RADICAL)
                .fold((0.0, 0), |(s, c), (_, v)| (s + v, c + 1));
            sum / count as f64
        };
        if non_radical_mean(r1.trajectory.last_state()) < non_radical_mean(r0.trajectory.last_state()) {
            lower += 1;
        }
        let d_median = (r1.metrics.engagement_cost_median - r0.metrics.engagement_cost_median).abs();
        let d_mean = (r1.metrics.engagement_cost_mean - r0.metrics.engagement_cost_mean).abs();
        if d_median < d_mean {
            median_stable += 1;
        }
    }
    outcome(
        pinned && lower >= 8 && median_stable >= 8,
        format!(
            "(a) radical pinned: {pinned}; (b) non-radical mean lower at rho=1: {lower}/10; (c) |d median| < |d mean|: {median_stable}/10 (need 8)"
        ),
    )
}

fn criterion_9() -> Outcome {
    let cfg = ScenarioConfig::network_a(Controller::Mb, Mode::Discrete, 2.5, DEFAULT_SEED);
    let files = |dir: &std::path::Path| {
        let prepared = PreparedScenario::new(cfg.clone()).unwrap();
        let out = prepared.run(2.5).unwrap();
        let run_dir = write_run(dir, &prepared, 2.5, &out).unwrap();
        (
            std::fs::read(run_dir.join("trajectory.csv")).unwrap(),
            std::fs::read(run_dir.join("metrics.json")).unwrap(),
        )
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let runs_equal = files(a.path()) == files(b.path());

    let sweep_cfg = ScenarioConfig::network_a(Controller::Mf, Mode::Discrete, 0.0, DEFAULT_SEED);
    let csv = |jobs| sweep_csv(&run_sweep(&sweep_cfg, 0.0, 5.5, 0.1, jobs).unwrap().report).unwrap();
    let sweeps_equal = csv(1) == csv(8);
    outcome(
        runs_equal && sweeps_equal,
        format!("repeated run files identical: {runs_equal}; sweep.csv jobs=1 vs jobs=8 identical: {sweeps_equal}"),
    )
}

fn criterion_10() -> Outcome {
    let mut r = rng(1010);
    let mut violations = 0usize;
    let mut errors = 0usize;
    for _ in 0..1000 {
        let net = random_network(&mut r, 30);
        let m = build_matrices(&net);
        let mut x = net.x0.clone();
        for _ in 0..100 {
            let u: f64 = r.random();
            match step(&m, &x, u) {
                Ok(next) => x = next,
                Err(_) => {
                    errors += 1;
                    break;
                }
            }
            violations += x.iter().filter(|v| !(0.0..=1.0).contains(*v)).count();
        }
    }
    outcome(
        violations == 0 && errors == 0,
        format!("1000 networks x 100 steps: {violations} out-of-box entries, {errors} step errors"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("MF closed form vs grid oracle", criterion_1),
        ("MF convergence to steady state", criterion_2),
        ("MB steady-state consistency", criterion_3),
        ("QP solver vs exhaustive active set", criterion_4),
        ("MPC regulation", criterion_5),
        ("H-matrix sign property", criterion_6),
        ("misinformation reduction trend", criterion_7),
        ("radical network behavior", criterion_8),
        ("determinism", criterion_9),
        ("state box invariance fuzz", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} — {name}: {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {}/10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
