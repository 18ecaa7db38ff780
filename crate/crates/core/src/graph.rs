//! Social network with a recommender channel.
//!
//! A [`Network`] holds the user-to-user influence matrix `w`, the
//! recommender-to-user weights `w_rec`, per-user stubbornness and the
//! initial sentiment. Each row of the augmented matrix `[w | w_rec]` is
//! substochastic; the built-in generators produce rows that sum to one,
//! spreading equal weight over every realized incoming edge.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Tolerance used when checking row sums and entry ranges.
pub const VALIDATION_TOLERANCE: f64 = 1e-12;

/// Attempts allowed per user when its sampled in-neighborhood is empty.
pub const MAX_EDGE_RESAMPLES: usize = 1000;

/// Seed fixing the topology and stubbornness of [`network_b`].
pub const NETWORK_B_SEED: u64 = 2;

/// Index (0-based) of the fully stubborn radical user in [`network_b`].
pub const NETWORK_B_RADICAL: usize = 4;

/// Initial sentiment of [`network_b`].
pub const NETWORK_B_X0: [f64; 6] = [0.33, 0.26, 0.17, 0.32, 1.00, 0.41];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub generator: String,
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl NetworkMeta {
    /// Metadata for files written by other tools.
    fn external() -> Self {
        Self {
            generator: "external".into(),
            seed: None,
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub w: DMatrix<f64>,
    pub w_rec: DVector<f64>,
    pub lambda: DVector<f64>,
    pub x0: DVector<f64>,
    pub meta: NetworkMeta,
}

/// Parameters of the Bernoulli random network. Defaults are the 100-user
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkAParams {
    pub n: usize,
    pub kappa_u: f64,
    pub kappa_r: f64,
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub beta_alpha: f64,
    pub beta_beta: f64,
}

impl Default for NetworkAParams {
    fn default() -> Self {
        Self {
            n: 100,
            kappa_u: 0.25,
            kappa_r: 0.80,
            lambda_low: 0.00,
            lambda_high: 0.05,
            beta_alpha: 7.0,
            beta_beta: 2.0,
        }
    }
}

impl NetworkAParams {
    fn check(&self) -> Result<()> {
        let prob = |p: f64| p > 0.0 && p <= 1.0;
        if self.n < 2 {
            return Err(Error::Domain(format!("network needs n >= 2, got {}", self.n)));
        }
        if !prob(self.kappa_u) || !prob(self.kappa_r) {
            return Err(Error::Domain(format!(
                "connectivity must lie in (0, 1]: kappa_u={}, kappa_r={}",
                self.kappa_u, self.kappa_r
            )));
        }
        if !(0.0 <= self.lambda_low && self.lambda_low <= self.lambda_high && self.lambda_high <= 1.0) {
            return Err(Error::Domain(format!(
                "stubbornness range [{}, {}] is not inside [0, 1]",
                self.lambda_low, self.lambda_high
            )));
        }
        if !(self.beta_alpha > 0.0 && self.beta_beta > 0.0) {
            return Err(Error::Domain("beta shape parameters must be positive".into()));
        }
        Ok(())
    }

    fn to_map(self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("n".to_string(), self.n as f64),
            ("kappa_u".to_string(), self.kappa_u),
            ("kappa_r".to_string(), self.kappa_r),
            ("lambda_low".to_string(), self.lambda_low),
            ("lambda_high".to_string(), self.lambda_high),
            ("beta_alpha".to_string(), self.beta_alpha),
            ("beta_beta".to_string(), self.beta_beta),
        ])
    }
}

impl Network {
    pub fn n(&self) -> usize {
        self.x0.len()
    }

    /// Builds a network from raw parts after checking that shapes agree.
    pub fn from_parts(
        w: DMatrix<f64>,
        w_rec: DVector<f64>,
        lambda: DVector<f64>,
        x0: DVector<f64>,
        meta: NetworkMeta,
    ) -> Result<Self> {
        let n = x0.len();
        if n == 0 || w.nrows() != n || w.ncols() != n || w_rec.len() != n || lambda.len() != n {
            return Err(Error::Domain(format!(
                "inconsistent network shapes: w {}x{}, w_rec {}, lambda {}, x0 {}",
                w.nrows(),
                w.ncols(),
                w_rec.len(),
                lambda.len(),
                n
            )));
        }
        Ok(Self {
            w,
            w_rec,
            lambda,
            x0,
            meta,
        })
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = NetworkFile {
            n: self.n(),
            w: self.w.row_iter().map(|r| r.iter().copied().collect()).collect(),
            w_rec: self.w_rec.iter().copied().collect(),
            lambda: self.lambda.iter().copied().collect(),
            x0: self.x0.iter().copied().collect(),
            metadata: self.meta.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        let n = file.n;
        if file.w.len() != n || file.w.iter().any(|r| r.len() != n) {
            return Err(Error::Domain(format!("w must be {n}x{n}")));
        }
        let w = DMatrix::from_fn(n, n, |i, j| file.w[i][j]);
        Self::from_parts(
            w,
            DVector::from_vec(file.w_rec),
            DVector::from_vec(file.lambda),
            DVector::from_vec(file.x0),
            file.metadata,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// On-disk layout of a network file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    n: usize,
    w: Vec<Vec<f64>>,
    w_rec: Vec<f64>,
    lambda: Vec<f64>,
    x0: Vec<f64>,
    #[serde(default = "NetworkMeta::external")]
    metadata: NetworkMeta,
}

/// Samples the in-neighborhood of every user and assigns equal weights.
///
/// User `i` draws its candidate sources `j != i` in index order, then the
/// recommender edge, all from its own stream. An empty draw is repeated on
/// the same stream.
fn sample_topology(n: usize, kappa_u: f64, kappa_r: f64, seed: u64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut w = DMatrix::zeros(n, n);
    let mut w_rec = DVector::zeros(n);
    let mut sources = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = rng::user_edges(seed, i);
        let mut attempts = 0;
        let has_rec = loop {
            sources.clear();
            for j in (0..n).filter(|&j| j != i) {
                if rng.random::<f64>() < kappa_u {
                    sources.push(j);
                }
            }
            let has_rec = rng.random::<f64>() < kappa_r;
            attempts += 1;
            if !sources.is_empty() || has_rec {
                break has_rec;
            }
            if attempts >= MAX_EDGE_RESAMPLES {
                return Err(Error::IsolatedUser { user: i, attempts });
            }
        };
        let weight = 1.0 / (sources.len() + usize::from(has_rec)) as f64;
        for &j in &sources {
            w[(i, j)] = weight;
        }
        if has_rec {
            w_rec[i] = weight;
        }
    }
    Ok((w, w_rec))
}

fn sample_stubbornness(seed: u64, user: usize, low: f64, high: f64) -> f64 {
    let u: f64 = rng::user_stubbornness(seed, user).random();
    low + (high - low) * u
}

/// Random network with Bernoulli edges, uniform stubbornness and Beta
/// initial sentiment.
///
/// Beta draws use `rand_distr::Beta` (Cheng's BB/BC rejection algorithms in
/// `rand_distr` 0.5), one stream per user.
pub fn generate_network_a(params: NetworkAParams, seed: u64) -> Result<Network> {
    params.check()?;
    let n = params.n;
    let (w, w_rec) = sample_topology(n, params.kappa_u, params.kappa_r, seed)?;
    let beta =
        Beta::new(params.beta_alpha, params.beta_beta).map_err(|e| Error::Domain(format!("beta distribution: {e}")))?;
    let lambda = DVector::from_fn(n, |i, _| {
        sample_stubbornness(seed, i, params.lambda_low, params.lambda_high)
    });
    let x0 = DVector::from_fn(n, |i, _| beta.sample(&mut rng::user_initial_state(seed, i)));
    Network::from_parts(
        w,
        w_rec,
        lambda,
        x0,
        NetworkMeta {
            generator: "network_a".into(),
            seed: Some(seed),
            params: params.to_map(),
        },
    )
}

/// Fixed six-user network with one fully stubborn radical user at maximum
/// extremity (index [`NETWORK_B_RADICAL`]).
pub fn network_b() -> Network {
    let base = NetworkAParams {
        n: NETWORK_B_X0.len(),
        ..NetworkAParams::default()
    };
    let (w, w_rec) = sample_topology(base.n, base.kappa_u, base.kappa_r, NETWORK_B_SEED)
        .expect("network B topology seed yields no isolated users");
    let lambda = DVector::from_fn(base.n, |i, _| {
        if i == NETWORK_B_RADICAL {
            1.0
        } else {
            sample_stubbornness(NETWORK_B_SEED, i, base.lambda_low, base.lambda_high)
        }
    });
    let mut params = base.to_map();
    params.remove("beta_alpha");
    params.remove("beta_beta");
    params.insert("radical_user".into(), NETWORK_B_RADICAL as f64);
    Network::from_parts(
        w,
        w_rec,
        lambda,
        DVector::from_row_slice(&NETWORK_B_X0),
        NetworkMeta {
            generator: "network_b".into(),
            seed: Some(NETWORK_B_SEED),
            params,
        },
    )
    .expect("network B shapes are consistent")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Augmented row sum exceeds one.
    RowSum {
        row: usize,
        sum: f64,
        excess: f64,
    },
    /// An entry of `w`, `w_rec`, `lambda` or `x0` lies outside `[0, 1]`.
    EntryRange {
        field: &'static str,
        row: usize,
        col: Option<usize>,
        value: f64,
    },
    SelfLoop {
        row: usize,
        weight: f64,
    },
    /// User with no incoming user or recommender edge.
    Isolated {
        row: usize,
    },
}

/// Diagnostics from [`validate`]; empty iff every network invariant holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(net: &Network) -> ValidationReport {
    let tol = VALIDATION_TOLERANCE;
    let in_unit = |v: f64| (-tol..=1.0 + tol).contains(&v);
    let mut violations = Vec::new();
    let n = net.n();
    for i in 0..n {
        for j in 0..n {
            let v = net.w[(i, j)];
            if !in_unit(v) {
                violations.push(Violation::EntryRange {
                    field: "w",
                    row: i,
                    col: Some(j),
                    value: v,
                });
            }
        }
        for (field, v) in [("w_rec", net.w_rec[i]), ("lambda", net.lambda[i]), ("x0", net.x0[i])] {
            if !in_unit(v) {
                violations.push(Violation::EntryRange {
                    field,
                    row: i,
                    col: None,
                    value: v,
                });
            }
        }
        if net.w[(i, i)] != 0.0 {
            violations.push(Violation::SelfLoop {
                row: i,
                weight: net.w[(i, i)],
            });
        }
        let sum = net.w.row(i).sum() + net.w_rec[i];
        if sum > 1.0 + tol {
            violations.push(Violation::RowSum {
                row: i,
                sum,
                excess: sum - 1.0,
            });
        }
        if net.w.row(i).iter().all(|&v| v == 0.0) && net.w_rec[i] == 0.0 {
            violations.push(Violation::Isolated { row: i });
        }
    }
    ValidationReport { violations }
}
