use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::trajectory::Trajectory;
use crate::landscape::EvaluationLedger;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("no evaluations to rank")]
    Empty,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no trajectories to aggregate")]
    NoTrajectories,
    #[error("trajectory {index} has config fingerprint {found}, expected {expected}")]
    ConfigMismatch {
        index: usize,
        expected: String,
        found: String,
    },
}

/// Mean of the `k` largest values (all of them when fewer exist).
pub fn topk_mean_of(values: &[f64], k: usize) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    if values.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.truncate(k);
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Mean primary fitness of the top `k` sequences the campaign evaluated.
pub fn topk_mean(ledger: &EvaluationLedger, k: usize) -> Result<f64, MetricError> {
    let values: Vec<f64> = ledger.records().iter().map(|c| c.primary_fitness()).collect();
    topk_mean_of(&values, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdKind {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n - 1 (0 for a single seed).
    Sample,
}

pub fn mean_std(xs: &[f64], kind: StdKind) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let denom = match kind {
        StdKind::Population => n,
        StdKind::Sample => n - 1.0,
    };
    let std = if denom > 0.0 { (ss / denom).sqrt() } else { 0.0 };
    (mean, std)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub k: usize,
    pub seeds: usize,
}

/// Top-k means across seeds of one configuration, recomputed from each
/// trajectory's evaluation records.
pub fn aggregate_seeds(
    trajectories: &[Trajectory],
    ks: &[usize],
    kind: StdKind,
) -> Result<Vec<MetricSummary>, MetricError> {
    let first = trajectories.first().ok_or(MetricError::NoTrajectories)?;
    let expected = &first.init().config_fingerprint;
    for (index, t) in trajectories.iter().enumerate() {
        let found = &t.init().config_fingerprint;
        if found != expected {
            return Err(MetricError::ConfigMismatch {
                index,
                expected: expected.clone(),
                found: found.clone(),
            });
        }
    }
    let fitness: Vec<Vec<f64>> = trajectories.iter().map(|t| t.fitness_values()).collect();
    ks.iter()
        .map(|&k| {
            let per_seed = fitness
                .iter()
                .map(|v| topk_mean_of(v, k))
                .collect::<Result<Vec<_>, _>>()?;
            let (mean, std) = mean_std(&per_seed, kind);
            Ok(MetricSummary {
                metric: format!("top{k}"),
                mean,
                std,
                k,
                seeds: per_seed.len(),
            })
        })
        .collect()
}
