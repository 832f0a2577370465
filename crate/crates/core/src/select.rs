//! Selection: elitist top-k, edit and budget rejection filters,
//! scalarization, and Pareto frontiers.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate::{Candidate, ObjectiveVector, RejectReason};
use crate::landscape::EvaluationLedger;
use crate::seq::{hamming, hamming_unchecked, SeqError, Sequence};

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectError {
    #[error("objective dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("weights must be nonnegative and sum to 1 (sum = {sum})")]
    Weights { sum: f64 },
    #[error("invalid regime: {0}")]
    Regime(String),
    #[error("population size must be at least 1")]
    EmptyPool,
    #[error(transparent)]
    Seq(#[from] SeqError),
}

/// The optimization problem a campaign solves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    Single,
    /// At most `h` edits from the wild type.
    Constrained { h: usize },
    /// At most `bh` edits from the nearest previously evaluated sequence.
    Budget { bh: usize },
    /// Weighted sum of fitness and the Hamming objective.
    MultiSum { weights: Vec<f64> },
    /// Pareto set selection over fitness and the Hamming objective.
    MultiPareto,
}

impl Regime {
    pub fn validate(&self) -> Result<(), SelectError> {
        match self {
            Regime::Constrained { h } if *h < 1 => {
                Err(SelectError::Regime("constrained regime needs h >= 1".into()))
            }
            Regime::Budget { bh } if *bh < 1 => {
                Err(SelectError::Regime("budget regime needs bh >= 1".into()))
            }
            Regime::MultiSum { weights } => {
                if weights.len() != 2 {
                    return Err(SelectError::Regime(format!(
                        "multi_sum needs 2 weights (fitness, hamming), got {}",
                        weights.len()
                    )));
                }
                check_weights(weights)
            }
            _ => Ok(()),
        }
    }

    pub fn is_multi_objective(&self) -> bool {
        matches!(self, Regime::MultiSum { .. } | Regime::MultiPareto)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Single => "single",
            Regime::Constrained { .. } => "constrained",
            Regime::Budget { .. } => "budget",
            Regime::MultiSum { .. } => "multi_sum",
            Regime::MultiPareto => "multi_pareto",
        }
    }
}

fn check_weights(w: &[f64]) -> Result<(), SelectError> {
    let sum: f64 = w.iter().sum();
    if w.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(SelectError::Weights { sum });
    }
    Ok(())
}

/// Weak dominance: every coordinate of `u` is at least that of `v`.
pub fn dominates(u: &ObjectiveVector, v: &ObjectiveVector) -> Result<bool, SelectError> {
    if u.dim() != v.dim() {
        return Err(SelectError::Dimension {
            left: u.dim(),
            right: v.dim(),
        });
    }
    Ok(weakly_dominates(u.values(), v.values()))
}

#[inline]
fn weakly_dominates(u: &[f64], v: &[f64]) -> bool {
    u.iter().zip(v).all(|(a, b)| a >= b)
}

fn lex_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Indices (into `vectors`) of the distinct vectors that no other distinct
/// vector weakly dominates.
fn frontier_of_distinct(vectors: &[&[f64]]) -> Vec<usize> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let dim = vectors[0].len();
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    if dim == 2 {
        // sweep: descending f1 (then f2); keep strict improvements in f2
        order.sort_by(|&a, &b| lex_desc(vectors[a], vectors[b]));
        let mut best = f64::NEG_INFINITY;
        let mut keep = Vec::new();
        for i in order {
            if vectors[i][1] > best {
                best = vectors[i][1];
                keep.push(i);
            }
        }
        return keep;
    }
    // Any distinct dominator has a sum at least as large and sorts earlier on
    // ties, so checking against already-kept points suffices.
    let sums: Vec<f64> = vectors.iter().map(|v| v.iter().sum()).collect();
    order.sort_by(|&a, &b| {
        sums[b]
            .total_cmp(&sums[a])
            .then_with(|| lex_desc(vectors[a], vectors[b]))
    });
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        if !keep.iter().any(|&k| weakly_dominates(vectors[k], vectors[i])) {
            keep.push(i);
        }
    }
    keep
}

/// Candidates whose objective vector is not weakly dominated by any distinct
/// vector in the set. Candidates sharing a frontier vector are all kept.
/// Output follows input order.
pub fn pareto_frontier(cands: &[Candidate]) -> Result<Vec<Candidate>, SelectError> {
    let Some(first) = cands.first() else {
        return Ok(Vec::new());
    };
    let dim = first.objectives.dim();
    if let Some(c) = cands.iter().find(|c| c.objectives.dim() != dim) {
        return Err(SelectError::Dimension {
            left: dim,
            right: c.objectives.dim(),
        });
    }
    let mut distinct: Vec<&[f64]> = cands.iter().map(|c| c.objectives.values()).collect();
    distinct.sort_by(|a, b| lex_desc(a, b));
    distinct.dedup_by(|a, b| lex_desc(a, b) == Ordering::Equal);
    let front: Vec<&[f64]> = frontier_of_distinct(&distinct)
        .into_iter()
        .map(|i| distinct[i])
        .collect();
    Ok(cands
        .iter()
        .filter(|c| {
            front
                .iter()
                .any(|f| lex_desc(f, c.objectives.values()) == Ordering::Equal)
        })
        .cloned()
        .collect())
}

/// Deterministic ranking: key descending, then earlier iteration, then
/// lexicographic sequence.
fn rank(a: &Candidate, b: &Candidate, ka: f64, kb: f64) -> Ordering {
    kb.total_cmp(&ka)
        .then(a.iteration.cmp(&b.iteration))
        .then_with(|| a.sequence.cmp(&b.sequence))
}

/// Pool ∪ offspring with repeated sequences collapsed to their first
/// appearance (pool members first).
pub fn merge_unique(pool: &[Candidate], offspring: &[Candidate]) -> Vec<Candidate> {
    let mut seen = HashSet::new();
    pool.iter()
        .chain(offspring)
        .filter(|c| seen.insert(c.sequence.clone()))
        .cloned()
        .collect()
}

/// The `k` best of pool ∪ offspring under `key`, best first.
pub fn select_topk<F>(
    pool: &[Candidate],
    offspring: &[Candidate],
    k: usize,
    key: F,
) -> Result<Vec<Candidate>, SelectError>
where
    F: Fn(&Candidate) -> f64,
{
    if k == 0 {
        return Err(SelectError::EmptyPool);
    }
    let mut merged: Vec<(f64, Candidate)> = merge_unique(pool, offspring)
        .into_iter()
        .map(|c| (key(&c), c))
        .collect();
    merged.sort_by(|(ka, a), (kb, b)| rank(a, b, *ka, *kb));
    merged.truncate(k);
    Ok(merged.into_iter().map(|(_, c)| c).collect())
}

/// Edit bound against the wild type: `1 <= d_H(x, wild) <= h`.
pub fn check_constrained(
    seq: &Sequence,
    wild_variant: &Sequence,
    h: usize,
) -> Result<(), RejectReason> {
    let distance = hamming(seq, wild_variant).map_err(|_| RejectReason::Length {
        expected: wild_variant.len(),
        got: seq.len(),
    })?;
    if (1..=h).contains(&distance) {
        Ok(())
    } else {
        Err(RejectReason::EditBound { distance, max: h })
    }
}

/// Budget bound: `1 <= min_p d_H(x, p) <= bh` over every evaluated `p`.
pub fn check_budget(
    seq: &Sequence,
    ledger: &EvaluationLedger,
    bh: usize,
) -> Result<(), RejectReason> {
    let distance = ledger.min_distance(seq).unwrap_or(0);
    if (1..=bh).contains(&distance) {
        Ok(())
    } else {
        Err(RejectReason::BudgetBound { distance, max: bh })
    }
}

pub fn filter_constrained(cands: &[Sequence], wild_variant: &Sequence, h: usize) -> Vec<Sequence> {
    cands
        .iter()
        .filter(|s| check_constrained(s, wild_variant, h).is_ok())
        .cloned()
        .collect()
}

pub fn filter_budget(cands: &[Sequence], ledger: &EvaluationLedger, bh: usize) -> Vec<Sequence> {
    cands
        .iter()
        .filter(|s| check_budget(s, ledger, bh).is_ok())
        .cloned()
        .collect()
}

/// Weighted sum of objectives; weights must be nonnegative and sum to 1.
pub fn scalarize(v: &ObjectiveVector, w: &[f64]) -> Result<f64, SelectError> {
    if v.dim() != w.len() {
        return Err(SelectError::Dimension {
            left: v.dim(),
            right: w.len(),
        });
    }
    check_weights(w)?;
    Ok(v.values().iter().zip(w).map(|(a, b)| a * b).sum())
}

/// `1 - d_H(x, wild) / span`, where `span` is the number of mutable sites.
pub fn hamming_objective(x: &Sequence, wild_variant: &Sequence, span: usize) -> Result<f64, SelectError> {
    let d = hamming(x, wild_variant)?;
    if span == 0 || d > span {
        return Err(SelectError::Regime(format!(
            "span {span} must be positive and cover distance {d}"
        )));
    }
    Ok(1.0 - d as f64 / span as f64)
}

/// Best primary fitness at each Hamming distance from the wild type.
pub fn best_per_distance(evaluated: &[Candidate], wild_variant: &Sequence) -> BTreeMap<usize, f64> {
    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
    for c in evaluated {
        if c.sequence.len() != wild_variant.len() {
            continue;
        }
        let d = hamming_unchecked(c.sequence.as_bytes(), wild_variant.as_bytes());
        let f = c.primary_fitness();
        out.entry(d)
            .and_modify(|best| {
                if f > *best {
                    *best = f
                }
            })
            .or_insert(f);
    }
    out
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Keeps at most `k` frontier members, preferring those whose nearest
/// neighbour in objective space is farthest away.
pub fn crowding_truncate(frontier: Vec<Candidate>, k: usize) -> Vec<Candidate> {
    if frontier.len() <= k {
        return frontier;
    }
    let spacing: Vec<f64> = frontier
        .iter()
        .enumerate()
        .map(|(i, c)| {
            frontier
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, o)| euclidean(c.objectives.values(), o.objectives.values()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut ranked: Vec<(f64, Candidate)> = spacing.into_iter().zip(frontier).collect();
    ranked.sort_by(|(sa, a), (sb, b)| rank(a, b, *sa, *sb));
    ranked.truncate(k);
    ranked.into_iter().map(|(_, c)| c).collect()
}

/// The selection key single-scalar regimes rank by.
pub fn selection_key(regime: &Regime, c: &Candidate) -> f64 {
    match regime {
        Regime::MultiSum { weights } => scalarize(&c.objectives, weights)
            .expect("weights validated with the regime"),
        _ => c.primary_fitness(),
    }
}

/// Next pool under `regime`.
pub fn next_pool(
    regime: &Regime,
    pool: &[Candidate],
    offspring: &[Candidate],
    k: usize,
) -> Result<Vec<Candidate>, SelectError> {
    match regime {
        Regime::MultiPareto => {
            if k == 0 {
                return Err(SelectError::EmptyPool);
            }
            let merged = merge_unique(pool, offspring);
            Ok(crowding_truncate(pareto_frontier(&merged)?, k))
        }
        _ => select_topk(pool, offspring, k, |c| selection_key(regime, c)),
    }
}
