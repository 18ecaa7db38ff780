//! Behavioral metrics of a finished run and Pareto data across runs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::content::{Corpus, Label};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Share of recommendation events showing false content; `None` in
    /// continuous mode or when nothing was recommended.
    pub misinformation: Option<f64>,
    pub sentiment_shift_mean: f64,
    pub sentiment_shift_median: f64,
    /// Per-user time-averaged engagement cost (lower means better aligned).
    pub engagement_cost_mean: f64,
    pub engagement_cost_median: f64,
    pub rho: f64,
}

/// Median, with the midpoint of the two central values for even counts.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// False recommendation events over all recommendation events. Steps
/// without a recommendation are ignored.
pub fn misinformation_ratio(traj: &Trajectory, corpus: &Corpus) -> Result<f64> {
    let labels: HashMap<&str, Label> = corpus.items.iter().map(|i| (i.id.as_str(), i.label)).collect();
    let mut events = 0usize;
    let mut false_events = 0usize;
    for id in traj.content_ids.iter().flatten() {
        let label = labels
            .get(id.as_str())
            .ok_or_else(|| Error::Domain(format!("trajectory shows unknown content `{id}`")))?;
        events += 1;
        if *label == Label::False {
            false_events += 1;
        }
    }
    if events == 0 {
        return Err(Error::UndefinedMetric("no recommendation events"));
    }
    Ok(false_events as f64 / events as f64)
}

/// Mean and median over users of `|x_i(τ) − x_i(0)|`.
pub fn sentiment_shift(traj: &Trajectory) -> Result<(f64, f64)> {
    let (Some(first), Some(last)) = (traj.states.first(), traj.states.last()) else {
        return Err(Error::UndefinedMetric("trajectory has no states"));
    };
    if traj.states.len() < 2 {
        return Err(Error::UndefinedMetric("sentiment shift needs at least two states"));
    }
    let shifts: Vec<f64> = last.iter().zip(first.iter()).map(|(a, b)| (a - b).abs()).collect();
    Ok((mean(&shifts), median(&shifts)))
}

/// Per-user `(1/τ)·Σ_t (x_i(t) − u(t))²`, summarized by mean and median.
pub fn engagement_cost_per_user(traj: &Trajectory) -> Result<(f64, f64)> {
    let tau = traj.controls.len();
    if tau == 0 {
        return Err(Error::UndefinedMetric("engagement cost needs at least one control"));
    }
    let n = traj.states[0].len();
    let mut per_user = vec![0.0; n];
    for (x, &u) in traj.states.iter().zip(&traj.controls) {
        for (acc, &xi) in per_user.iter_mut().zip(x.iter()) {
            *acc += (xi - u) * (xi - u);
        }
    }
    per_user.iter_mut().for_each(|v| *v /= tau as f64);
    Ok((mean(&per_user), median(&per_user)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub rho: f64,
    pub engagement_cost_median: f64,
    pub misinformation: Option<f64>,
    /// No other point is at least as good on both axes and strictly better on one.
    pub non_dominated: bool,
}

/// Points ordered by `rho`, with the non-dominated set flagged (lower is
/// better on both axes). Points without a misinformation value are never
/// dominated and never dominate.
pub fn pareto_points(runs: &[RunMetrics]) -> Vec<ParetoPoint> {
    let mut points: Vec<ParetoPoint> = runs
        .iter()
        .map(|r| ParetoPoint {
            rho: r.rho,
            engagement_cost_median: r.engagement_cost_median,
            misinformation: r.misinformation,
            non_dominated: true,
        })
        .collect();
    points.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    let dominates = |a: &ParetoPoint, b: &ParetoPoint| match (a.misinformation, b.misinformation) {
        (Some(ma), Some(mb)) => {
            let (ea, eb) = (a.engagement_cost_median, b.engagement_cost_median);
            ea <= eb && ma <= mb && (ea < eb || ma < mb)
        }
        _ => false,
    };
    let flags: Vec<bool> = points.iter().map(|p| !points.iter().any(|q| dominates(q, p))).collect();
    for (p, flag) in points.iter_mut().zip(flags) {
        p.non_dominated = flag;
    }
    points
}
