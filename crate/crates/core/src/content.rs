//! Scored content corpus, appearance scheduling and discrete selection.
//!
//! Each item carries an emotional extremity score in `[0, 1]` aggregated
//! from six affective dimensions. Items appear at a creation step `t_c`
//! and stay eligible for `z` steps afterwards.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::costfn::{content_age, mitigation_cost_at, CostParams};
use crate::error::{Error, Result};
use crate::rng;
use crate::State;

/// Dimension order: fear, disgust, anxiety, shock, negativity, subjectivity.
pub const DIMENSIONS: [&str; 6] = ["fear", "disgust", "anxiety", "shock", "negativity", "subjectivity"];
pub const DIMENSION_WEIGHTS: [f64; 6] = [0.15, 0.15, 0.15, 0.15, 0.20, 0.20];

/// Largest accepted gap between a stored score and its recomputed aggregate.
pub const SCORE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    True,
    False,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::True => "true",
            Label::False => "false",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "true" => Ok(Label::True),
            "false" => Ok(Label::False),
            other => Err(format!("label must be `true` or `false`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContentItem {
    pub id: String,
    pub label: Label,
    pub dims: Option<[f64; 6]>,
    /// Aggregated emotional extremity.
    pub score: f64,
    /// Creation step.
    pub t_c: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorpusSource {
    Ingested { path: PathBuf },
    Synthetic { params: SynthesisParams },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusMeta {
    pub source: CorpusSource,
    pub seed: Option<u64>,
    /// Whether every item has a meaningful `t_c` (from a file column or the scheduler).
    pub scheduled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub items: Vec<ContentItem>,
    pub meta: CorpusMeta,
}

pub fn aggregate_score(dims: &[f64; 6]) -> Result<f64> {
    if let Some(k) = dims.iter().position(|d| !(0.0..=1.0).contains(d)) {
        return Err(Error::Domain(format!("{} = {} outside [0, 1]", DIMENSIONS[k], dims[k])));
    }
    Ok(dims.iter().zip(DIMENSION_WEIGHTS).map(|(d, w)| d * w).sum())
}

/// Parameters of the synthetic corpus. Defaults mirror a balanced corpus
/// of 4000 statements with false items scoring higher on average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisParams {
    pub n_items: usize,
    pub false_fraction: f64,
    pub false_mean: f64,
    pub true_mean: f64,
    /// Beta concentration `α + β`.
    pub concentration: f64,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            n_items: 4000,
            false_fraction: 0.5,
            false_mean: 0.537,
            true_mean: 0.379,
            concentration: 10.0,
        }
    }
}

/// Draws item scores from `Beta(mean·c, (1 − mean)·c)` per label.
///
/// The first `round(n_items · false_fraction)` items are false. Every item
/// samples from its own stream, and its six dimensions repeat the score.
pub fn synthesize_corpus(params: SynthesisParams, seed: u64) -> Result<Corpus> {
    let unit_open = |m: f64| m > 0.0 && m < 1.0;
    if !unit_open(params.false_mean) || !unit_open(params.true_mean) {
        return Err(Error::Domain("score means must lie in (0, 1)".into()));
    }
    if !(0.0..=1.0).contains(&params.false_fraction) {
        return Err(Error::Domain("false fraction must lie in [0, 1]".into()));
    }
    if !(params.concentration > 0.0 && params.concentration.is_finite()) {
        return Err(Error::Domain(format!(
            "concentration must be positive, got {}",
            params.concentration
        )));
    }
    let beta = |mean: f64| {
        Beta::new(mean * params.concentration, (1.0 - mean) * params.concentration)
            .map_err(|e| Error::Domain(format!("beta distribution: {e}")))
    };
    let false_dist = beta(params.false_mean)?;
    let true_dist = beta(params.true_mean)?;
    let n_false = (params.n_items as f64 * params.false_fraction).round() as usize;
    let width = params.n_items.max(1).to_string().len();

    let items = (0..params.n_items)
        .map(|k| {
            let (label, dist) = if k < n_false {
                (Label::False, &false_dist)
            } else {
                (Label::True, &true_dist)
            };
            let score = dist.sample(&mut rng::item_score(seed, k));
            ContentItem {
                id: format!("syn-{k:0width$}"),
                label,
                dims: Some([score; 6]),
                score,
                t_c: 0,
            }
        })
        .collect();
    Ok(Corpus {
        items,
        meta: CorpusMeta {
            source: CorpusSource::Synthetic { params },
            seed: Some(seed),
            scheduled: false,
        },
    })
}

const BASE_HEADER: [&str; 9] = [
    "id",
    "label",
    "fear",
    "disgust",
    "anxiety",
    "shock",
    "negativity",
    "subjectivity",
    "score",
];

/// Reads the corpus CSV format.
///
/// Columns: `id,label,fear,disgust,anxiety,shock,negativity,subjectivity,score[,t_c]`.
/// The six dimension cells are either all filled, in which case the score
/// must match their aggregate, or all empty.
pub fn ingest_corpus(path: &Path) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(file, path)
}

pub fn read_corpus<R: Read>(input: R, path: &Path) -> Result<Corpus> {
    let malformed = |row: usize, message: String| Error::MalformedRow {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    let has_t_c = match names.as_slice() {
        [] => false,
        n if n == BASE_HEADER => false,
        n if n.len() == 10 && n[..9] == BASE_HEADER && n[9] == "t_c" => true,
        _ => {
            return Err(malformed(
                1,
                format!(
                    "header must be `{}[,t_c]`, got `{}`",
                    BASE_HEADER.join(","),
                    names.join(",")
                ),
            ))
        }
    };

    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let expected = if has_t_c { 10 } else { 9 };
        if record.len() != expected {
            return Err(malformed(
                row,
                format!("expected {expected} fields, found {}", record.len()),
            ));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(malformed(row, "empty id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(malformed(row, format!("duplicate id `{id}`")));
        }
        let label: Label = record[1].parse().map_err(|e| malformed(row, e))?;
        let parse = |k: usize| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .map_err(|e| malformed(row, format!("{}: {e}", BASE_HEADER[k])))
        };
        let filled = (2..8).filter(|&k| !record[k].is_empty()).count();
        let dims = match filled {
            0 => None,
            6 => {
                let mut d = [0.0; 6];
                for (k, slot) in d.iter_mut().enumerate() {
                    *slot = parse(k + 2)?;
                }
                Some(d)
            }
            _ => {
                return Err(malformed(
                    row,
                    "dimension columns must be all filled or all empty".into(),
                ))
            }
        };
        let score = parse(8)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(malformed(row, format!("score {score} outside [0, 1]")));
        }
        if let Some(d) = &dims {
            let aggregate = aggregate_score(d).map_err(|e| malformed(row, e.to_string()))?;
            if (aggregate - score).abs() > SCORE_TOLERANCE {
                return Err(malformed(
                    row,
                    format!("stored score {score} disagrees with dimension aggregate {aggregate}"),
                ));
            }
        }
        let t_c = if has_t_c {
            record[9]
                .parse::<u64>()
                .map_err(|e| malformed(row, format!("t_c: {e}")))?
        } else {
            0
        };
        items.push(ContentItem {
            id,
            label,
            dims,
            score,
            t_c,
        });
    }
    Ok(Corpus {
        items,
        meta: CorpusMeta {
            source: CorpusSource::Ingested {
                path: path.to_path_buf(),
            },
            seed: None,
            scheduled: has_t_c,
        },
    })
}

impl Corpus {
    /// Writes the corpus CSV; the `t_c` column is present when the corpus is scheduled.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = BASE_HEADER.to_vec();
        if self.meta.scheduled {
            header.push("t_c");
        }
        wtr.write_record(&header)?;
        for item in &self.items {
            let mut row = vec![item.id.clone(), item.label.to_string()];
            match &item.dims {
                Some(d) => row.extend(d.iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), 6)),
            }
            row.push(item.score.to_string());
            if self.meta.scheduled {
                row.push(item.t_c.to_string());
            }
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("<corpus>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Items with `t_c ≤ t` and `t − t_c ≤ z`.
    pub fn eligible(&self, t: u64, z: u64) -> Vec<&ContentItem> {
        eligible(self, t, z)
    }

    pub fn stats(&self) -> CorpusStats {
        let mut stats = CorpusStats::default();
        let (mut sum_true, mut sum_false) = (0.0, 0.0);
        for item in &self.items {
            match item.label {
                Label::True => {
                    stats.n_true += 1;
                    sum_true += item.score;
                }
                Label::False => {
                    stats.n_false += 1;
                    sum_false += item.score;
                }
            }
        }
        stats.true_mean = (stats.n_true > 0).then(|| sum_true / stats.n_true as f64);
        stats.false_mean = (stats.n_false > 0).then(|| sum_false / stats.n_false as f64);
        stats
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub n_true: usize,
    pub n_false: usize,
    pub true_mean: Option<f64>,
    pub false_mean: Option<f64>,
}

/// Assigns every item a creation step uniform on `{0, …, tau − 1}`, drawn
/// from the item's own stream.
pub fn schedule_appearances(corpus: &Corpus, tau: u64, seed: u64) -> Result<Corpus> {
    if tau == 0 {
        return Err(Error::Domain("schedule needs tau >= 1".into()));
    }
    let mut out = corpus.clone();
    for (k, item) in out.items.iter_mut().enumerate() {
        item.t_c = rng::item_appearance(seed, k).random_range(0..tau);
    }
    out.meta.scheduled = true;
    Ok(out)
}

pub fn eligible(corpus: &Corpus, t: u64, z: u64) -> Vec<&ContentItem> {
    corpus
        .items
        .iter()
        .filter(|item| item.t_c <= t && t - item.t_c <= z)
        .collect()
}

/// Picks the candidate with the lowest mitigation cost at its own age.
///
/// Ties go to the newer item (larger `t_c`), then the smaller id.
/// `_u_target` is the continuous controller output; it is not used by the
/// decision and only kept in the signature so callers pass it alongside.
pub fn select_discrete<'a>(
    x: &State,
    _u_target: f64,
    candidates: &[&'a ContentItem],
    t: u64,
    params: &CostParams,
) -> Result<&'a ContentItem> {
    let mut best: Option<(&ContentItem, f64)> = None;
    for &item in candidates {
        let age = content_age(t, item.t_c, params)?;
        let cost = mitigation_cost_at(x.as_slice(), item.score, params.decay(age), params.rho)?;
        let better = match best {
            None => true,
            Some((current, best_cost)) => {
                cost < best_cost
                    || (cost == best_cost
                        && (item.t_c > current.t_c || (item.t_c == current.t_c && item.id < current.id)))
            }
        };
        if better {
            best = Some((item, cost));
        }
    }
    best.map(|(item, _)| item).ok_or(Error::NoContent)
}
