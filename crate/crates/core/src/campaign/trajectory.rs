use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::candidate::{ObjectiveVector, RejectReason, Source};
use crate::select::Regime;
use crate::seq::Sequence;

/// One line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub campaign_id: String,
    pub iteration: usize,
    pub timestamp: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Init(InitInfo),
    Proposal(ProposalInfo),
    Rejection(RejectionInfo),
    Evaluation(EvaluationInfo),
    Selection(SelectionInfo),
    Metrics(MetricsInfo),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitInfo {
    pub config_fingerprint: String,
    pub seed: u64,
    pub landscape: String,
    pub space: String,
    pub wild_variant: Sequence,
    /// 1-based.
    pub sites: Vec<usize>,
    pub residues: String,
    pub regime: Regime,
    pub population: usize,
    pub iterations: usize,
    pub mutation_rate: f64,
    pub llm_enabled: bool,
    pub init_mode: String,
    pub objectives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalInfo {
    pub slot: usize,
    pub source: Source,
    pub sequence: Sequence,
    pub parents: [Sequence; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt: Option<usize>,
}

/// Where in the pipeline a sequence was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// A chat-model attempt that produced no valid proposal.
    Llm,
    /// An operator child that failed proposal validation.
    Validate,
    /// A valid proposal outside the regime's edit bound.
    Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionInfo {
    pub slot: usize,
    pub source: Source,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Sequence>,
    pub parents: [Sequence; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt: Option<usize>,
    #[serde(flatten)]
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationInfo {
    pub sequence: Sequence,
    pub source: Source,
    pub fitness: ObjectiveVector,
    pub objectives: ObjectiveVector,
    /// Served from an earlier record; no oracle charge.
    pub cached: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parents: Option<[Sequence; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionInfo {
    pub stalled: bool,
    pub pool: Vec<Sequence>,
    pub pool_fitness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub k: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsInfo {
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub evaluations: usize,
    pub oracle_calls: u64,
    pub stalled_iterations: Vec<usize>,
    pub topk: Vec<TopK>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_sequence: Option<Sequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_fitness: Option<f64>,
}

/// Receives trajectory records as they happen.
pub trait TrajectorySink {
    fn write(&mut self, record: &Record) -> std::io::Result<()>;
}

/// Appends JSON lines, flushing after each so a crashed run stays readable.
pub struct JsonlSink<W: Write> {
    out: W,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> TrajectorySink for JsonlSink<W> {
    fn write(&mut self, record: &Record) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub records: Vec<Record>,
}

impl TrajectorySink for MemorySink {
    fn write(&mut self, record: &Record) -> std::io::Result<()> {
        self.records.push(record.clone());
        Ok(())
    }
}

impl<S: TrajectorySink + ?Sized> TrajectorySink for &mut S {
    fn write(&mut self, record: &Record) -> std::io::Result<()> {
        (**self).write(record)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Shape { path: String, message: String },
}

/// A parsed trajectory. All reports are derived from this.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    records: Vec<Record>,
}

impl Trajectory {
    /// Checks the structural invariants: one leading init record, a single
    /// campaign id, and contiguous iteration indices starting at 0.
    pub fn from_records(records: Vec<Record>) -> Result<Self, String> {
        let first = records.first().ok_or("empty trajectory")?;
        if !matches!(first.event, Event::Init(_)) {
            return Err("first record is not an init record".into());
        }
        let id = &first.campaign_id;
        let mut last = 0usize;
        for (i, r) in records.iter().enumerate() {
            if &r.campaign_id != id {
                return Err(format!("record {} belongs to campaign {}", i + 1, r.campaign_id));
            }
            if i > 0 && matches!(r.event, Event::Init(_)) {
                return Err(format!("record {} is a second init record", i + 1));
            }
            if r.iteration < last || r.iteration > last + 1 {
                return Err(format!(
                    "record {} jumps from iteration {} to {}",
                    i + 1,
                    last,
                    r.iteration
                ));
            }
            last = r.iteration;
        }
        Ok(Self { records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrajectoryError> {
        let path = path.as_ref();
        let shown = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|source| TrajectoryError::Io {
            path: shown.clone(),
            source,
        })?;
        let mut records = Vec::new();
        for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| TrajectoryError::Io {
                path: shown.clone(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|e| TrajectoryError::Parse {
                path: shown.clone(),
                line: n + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Self::from_records(records).map_err(|message| TrajectoryError::Shape {
            path: shown,
            message,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn campaign_id(&self) -> &str {
        &self.records[0].campaign_id
    }

    pub fn init(&self) -> &InitInfo {
        match &self.records[0].event {
            Event::Init(i) => i,
            _ => unreachable!("checked in from_records"),
        }
    }

    pub fn final_metrics(&self) -> Option<&MetricsInfo> {
        self.records.iter().rev().find_map(|r| match &r.event {
            Event::Metrics(m) => Some(m),
            _ => None,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.final_metrics().is_some_and(|m| m.complete)
    }

    /// Highest iteration index present.
    pub fn last_iteration(&self) -> usize {
        self.records.last().map(|r| r.iteration).unwrap_or(0)
    }

    pub fn evaluations(&self) -> impl Iterator<Item = (usize, &EvaluationInfo)> {
        self.records.iter().filter_map(|r| match &r.event {
            Event::Evaluation(e) => Some((r.iteration, e)),
            _ => None,
        })
    }

    /// First evaluation of each distinct sequence, in ledger order.
    pub fn distinct_evaluations(&self) -> Vec<(usize, &EvaluationInfo)> {
        self.evaluations().filter(|(_, e)| !e.cached).collect()
    }

    pub fn proposals(&self) -> impl Iterator<Item = (usize, &ProposalInfo)> {
        self.records.iter().filter_map(|r| match &r.event {
            Event::Proposal(p) => Some((r.iteration, p)),
            _ => None,
        })
    }

    pub fn rejections(&self) -> impl Iterator<Item = (usize, &RejectionInfo)> {
        self.records.iter().filter_map(|r| match &r.event {
            Event::Rejection(p) => Some((r.iteration, p)),
            _ => None,
        })
    }

    pub fn selections(&self) -> impl Iterator<Item = (usize, &SelectionInfo)> {
        self.records.iter().filter_map(|r| match &r.event {
            Event::Selection(s) => Some((r.iteration, s)),
            _ => None,
        })
    }

    /// Primary fitness of every distinct evaluated sequence.
    pub fn fitness_values(&self) -> Vec<f64> {
        self.distinct_evaluations()
            .iter()
            .map(|(_, e)| e.fitness.primary())
            .collect()
    }

    /// Best primary fitness among sequences evaluated at or before each
    /// iteration, for iterations `0..=last_iteration()`.
    pub fn best_so_far(&self) -> Vec<(usize, f64)> {
        let mut per_iter: BTreeMap<usize, f64> = BTreeMap::new();
        for (it, e) in self.distinct_evaluations() {
            let f = e.fitness.primary();
            per_iter
                .entry(it)
                .and_modify(|b| *b = b.max(f))
                .or_insert(f);
        }
        let mut best = f64::NEG_INFINITY;
        (0..=self.last_iteration())
            .map(|t| {
                if let Some(&f) = per_iter.get(&t) {
                    best = best.max(f);
                }
                (t, best)
            })
            .collect()
    }
}

pub fn write_trajectory<W: Write>(out: W, records: &[Record]) -> std::io::Result<()> {
    let mut sink = JsonlSink::new(std::io::BufWriter::new(out));
    for r in records {
        sink.write(r)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> Sequence {
        Sequence::new(s).unwrap()
    }

    fn record(iteration: usize, event: Event) -> Record {
        Record {
            campaign_id: "c1".into(),
            iteration,
            timestamp: 0,
            event,
        }
    }

    fn init() -> Event {
        Event::Init(InitInfo {
            config_fingerprint: "f".into(),
            seed: 1,
            landscape: "toy".into(),
            space: "toy".into(),
            wild_variant: seq("AA"),
            sites: vec![1, 2],
            residues: "AC".into(),
            regime: Regime::Constrained { h: 2 },
            population: 2,
            iterations: 1,
            mutation_rate: 0.5,
            llm_enabled: false,
            init_mode: "single_mutant".into(),
            objectives: 1,
        })
    }

    fn eval(s: &str, f: f64, cached: bool) -> Event {
        let v = ObjectiveVector::scalar(f).unwrap();
        Event::Evaluation(EvaluationInfo {
            sequence: seq(s),
            source: Source::Init,
            fitness: v.clone(),
            objectives: v,
            cached,
            slot: None,
            parents: None,
        })
    }

    #[test]
    fn records_round_trip_through_json() {
        let recs = vec![
            record(0, init()),
            record(0, eval("AC", 0.1, false)),
            record(
                1,
                Event::Rejection(RejectionInfo {
                    slot: 3,
                    source: Source::Crossover,
                    stage: Stage::Regime,
                    sequence: Some(seq("CC")),
                    parents: [seq("AC"), seq("CA")],
                    attempt: None,
                    reason: RejectReason::EditBound { distance: 2, max: 1 },
                }),
            ),
            record(
                1,
                Event::Metrics(MetricsInfo {
                    complete: true,
                    error: None,
                    evaluations: 1,
                    oracle_calls: 1,
                    stalled_iterations: vec![1],
                    topk: vec![TopK { k: 1, mean: 0.1 }],
                    best_sequence: Some(seq("AC")),
                    best_fitness: Some(0.1),
                }),
            ),
        ];
        for r in &recs {
            let line = serde_json::to_string(r).unwrap();
            let back: Record = serde_json::from_str(&line).unwrap();
            assert_eq!(&back, r, "{line}");
        }
        let line = serde_json::to_string(&recs[2]).unwrap();
        assert!(line.contains(r#""kind":"rejection""#));
        assert!(line.contains(r#""reason":"edit_bound""#));
    }

    #[test]
    fn shape_checks() {
        assert!(Trajectory::from_records(vec![]).is_err());
        assert!(Trajectory::from_records(vec![record(0, eval("AA", 0.0, false))]).is_err());
        assert!(Trajectory::from_records(vec![record(0, init()), record(2, eval("AA", 0.0, false))]).is_err());
        let t = Trajectory::from_records(vec![
            record(0, init()),
            record(0, eval("AC", 0.5, false)),
            record(1, eval("CC", 0.25, false)),
            record(1, eval("AC", 0.5, true)),
        ])
        .unwrap();
        assert_eq!(t.fitness_values(), vec![0.5, 0.25]);
        assert_eq!(t.best_so_far(), vec![(0, 0.5), (1, 0.5)]);
        assert!(!t.is_complete());
    }
}
