//! CSV tables derived from trajectories: top-k summaries, best-so-far
//! curves and frontiers.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::campaign::{aggregate_seeds, MetricError, MetricSummary, StdKind, Trajectory};
use crate::candidate::{Candidate, ObjectiveVector};
use crate::select::{best_per_distance, merge_unique, pareto_frontier, SelectError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("pareto frontier needs at least 2 objectives, trajectory has {0}")]
    Dimension(usize),
    #[error("trajectories disagree on {0}")]
    Mismatch(String),
    #[error("no trajectories given")]
    Empty,
}

pub fn metrics_table(
    trajectories: &[Trajectory],
    ks: &[usize],
    kind: StdKind,
) -> Result<Vec<MetricSummary>, ReportError> {
    Ok(aggregate_seeds(trajectories, ks, kind)?)
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricSummary]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricSummary>, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub seed: u64,
    pub iteration: usize,
    pub best_fitness: f64,
    /// Distinct sequences evaluated up to and including this iteration.
    pub evaluations: usize,
}

/// Best fitness so far at every iteration of every trajectory.
pub fn curve_rows(trajectories: &[Trajectory]) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for t in trajectories {
        let distinct = t.distinct_evaluations();
        for (iteration, best) in t.best_so_far() {
            rows.push(CurveRow {
                seed: t.init().seed,
                iteration,
                best_fitness: best,
                evaluations: distinct.iter().filter(|(it, _)| *it <= iteration).count(),
            });
        }
    }
    rows
}

pub fn write_curve_csv<W: Write>(out: W, rows: &[CurveRow]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(input: R) -> Result<Vec<CurveRow>, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Every distinct evaluated sequence across the trajectories, as
/// candidates carrying their recorded objectives.
pub fn evaluated_candidates(trajectories: &[Trajectory]) -> Vec<Candidate> {
    let all: Vec<Candidate> = trajectories
        .iter()
        .flat_map(|t| {
            t.distinct_evaluations()
                .into_iter()
                .map(|(iteration, e)| Candidate {
                    sequence: e.sequence.clone(),
                    fitness: e.fitness.clone(),
                    objectives: e.objectives.clone(),
                    parents: e.parents.clone().map(|[a, b]| (a, b)),
                    source: e.source,
                    iteration,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    merge_unique(&all, &[])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoRow {
    pub f1: f64,
    pub f2: f64,
    pub sequence: String,
}

/// Pareto frontier over all evaluations, best first objective first.
pub fn pareto_rows(trajectories: &[Trajectory]) -> Result<Vec<ParetoRow>, ReportError> {
    let first = trajectories.first().ok_or(ReportError::Empty)?;
    let dim = first.init().objectives;
    if dim < 2 {
        return Err(ReportError::Dimension(dim));
    }
    let cands = evaluated_candidates(trajectories);
    let mut front = pareto_frontier(&cands)?;
    front.sort_by(|a, b| {
        let (x, y): (&ObjectiveVector, &ObjectiveVector) = (&a.objectives, &b.objectives);
        y.values()[0]
            .total_cmp(&x.values()[0])
            .then(y.values()[1].total_cmp(&x.values()[1]))
            .then_with(|| a.sequence.cmp(&b.sequence))
    });
    Ok(front
        .into_iter()
        .map(|c| ParetoRow {
            f1: c.objectives.values()[0],
            f2: c.objectives.values()[1],
            sequence: c.sequence.to_string(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub distance: usize,
    pub fitness: f64,
}

/// Best fitness at each Hamming distance from the wild type.
pub fn per_distance_rows(trajectories: &[Trajectory]) -> Result<Vec<DistanceRow>, ReportError> {
    let first = trajectories.first().ok_or(ReportError::Empty)?;
    let wild = &first.init().wild_variant;
    if let Some(t) = trajectories.iter().find(|t| &t.init().wild_variant != wild) {
        return Err(ReportError::Mismatch(format!(
            "wild type ({} vs {})",
            wild,
            t.init().wild_variant
        )));
    }
    Ok(best_per_distance(&evaluated_candidates(trajectories), wild)
        .into_iter()
        .map(|(distance, fitness)| DistanceRow { distance, fitness })
        .collect())
}

pub fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
