use std::collections::HashMap;

use super::{LandscapeError, Oracle};
use crate::candidate::{Candidate, ObjectiveError, ObjectiveVector, Source};
use crate::parallel::Executor;
use crate::seq::{hamming_unchecked, Sequence};

/// A sequence waiting for its oracle score.
#[derive(Debug, Clone, PartialEq)]
pub struct Pending {
    pub sequence: Sequence,
    pub parents: Option<(Sequence, Sequence)>,
    pub source: Source,
}

impl Pending {
    pub fn init(sequence: Sequence) -> Self {
        Self {
            sequence,
            parents: None,
            source: Source::Init,
        }
    }
}

/// Result of routing one pending sequence through the ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub candidate: Candidate,
    /// True when the score came from an earlier record rather than the oracle.
    pub cached: bool,
}

/// Append-only record of every evaluated sequence. Doubles as the oracle
/// cache, so each distinct sequence is charged once.
#[derive(Debug, Clone)]
pub struct EvaluationLedger {
    oracle_name: String,
    records: Vec<Candidate>,
    index: HashMap<Sequence, usize>,
    call_count: u64,
}

impl EvaluationLedger {
    pub fn new(oracle_name: impl Into<String>) -> Self {
        Self {
            oracle_name: oracle_name.into(),
            records: Vec::new(),
            index: HashMap::new(),
            call_count: 0,
        }
    }

    pub fn oracle_name(&self) -> &str {
        &self.oracle_name
    }

    pub fn records(&self) -> &[Candidate] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sequences actually sent to the oracle.
    pub fn call_count(&self) -> u64 {
        self.call_count
    }

    pub fn get(&self, seq: &Sequence) -> Option<&Candidate> {
        self.index.get(seq).map(|&i| &self.records[i])
    }

    pub fn contains(&self, seq: &Sequence) -> bool {
        self.index.contains_key(seq)
    }

    /// Minimum Hamming distance from `seq` to any recorded sequence.
    pub fn min_distance(&self, seq: &Sequence) -> Option<usize> {
        self.records
            .iter()
            .filter(|c| c.sequence.len() == seq.len())
            .map(|c| hamming_unchecked(c.sequence.as_bytes(), seq.as_bytes()))
            .min()
    }

    /// Scores `pending` in order. Unseen sequences go to the oracle in one
    /// batch and are appended in submission order; repeats are answered from
    /// the ledger. `derive` maps the oracle output to the selection
    /// objectives.
    pub fn evaluate<D>(
        &mut self,
        oracle: &Oracle,
        exec: &Executor,
        iteration: usize,
        pending: &[Pending],
        derive: D,
    ) -> Result<Vec<Evaluated>, LandscapeError>
    where
        D: Fn(&Sequence, &ObjectiveVector) -> Result<ObjectiveVector, ObjectiveError>,
    {
        let mut fresh: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, p) in pending.iter().enumerate() {
            if !self.index.contains_key(&p.sequence) && seen.insert(&p.sequence) {
                fresh.push(i);
            }
        }
        if !fresh.is_empty() {
            let batch: Vec<Sequence> = fresh.iter().map(|&i| pending[i].sequence.clone()).collect();
            let scores = oracle.score_variants(&batch, exec)?;
            self.call_count += batch.len() as u64;
            for (&i, fitness) in fresh.iter().zip(scores) {
                let p = &pending[i];
                let objectives = derive(&p.sequence, &fitness)?;
                self.index.insert(p.sequence.clone(), self.records.len());
                self.records.push(Candidate {
                    sequence: p.sequence.clone(),
                    fitness,
                    objectives,
                    parents: p.parents.clone(),
                    source: p.source,
                    iteration,
                });
            }
        }
        let fresh_set: std::collections::HashSet<usize> = fresh.into_iter().collect();
        Ok(pending
            .iter()
            .enumerate()
            .map(|(i, p)| Evaluated {
                candidate: self.records[self.index[&p.sequence]].clone(),
                cached: !fresh_set.contains(&i),
            })
            .collect())
    }
}
