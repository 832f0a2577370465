use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::Sequence;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("objective vector must have at least one entry")]
    Empty,
    #[error("objective {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("objective dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Fitness scores for one sequence, one entry per objective. Larger is
/// better in every coordinate.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(mut values: Vec<f64>) -> Result<Self, ObjectiveError> {
        // -0.0 -> 0.0 so bitwise ordering agrees with `==`
        values.iter_mut().for_each(|v| *v += 0.0);
        if values.is_empty() {
            return Err(ObjectiveError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ObjectiveError::NonFinite {
                index,
                value: values[index],
            });
        }
        Ok(Self(values))
    }

    pub fn scalar(value: f64) -> Result<Self, ObjectiveError> {
        Self::new(vec![value])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The first objective; the oracle fitness in every regime.
    pub fn primary(&self) -> f64 {
        self.0[0]
    }

    pub fn extended(&self, extra: f64) -> Result<Self, ObjectiveError> {
        let mut v = self.0.clone();
        v.push(extra);
        Self::new(v)
    }
}

impl TryFrom<Vec<f64>> for ObjectiveVector {
    type Error = ObjectiveError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ObjectiveVector> for Vec<f64> {
    fn from(v: ObjectiveVector) -> Self {
        v.0
    }
}

impl fmt::Debug for ObjectiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

/// Which operator produced a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Init,
    Llm,
    Crossover,
    Mutation,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Init => "init",
            Source::Llm => "llm",
            Source::Crossover => "crossover",
            Source::Mutation => "mutation",
        })
    }
}

/// Why a proposed sequence was dropped before evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    Length { expected: usize, got: usize },
    NonCanonical,
    IdenticalToParent,
    IdenticalToWildType,
    /// Outside `1..=max` edits from the wild type.
    EditBound { distance: usize, max: usize },
    /// Outside `1..=max` edits from the nearest evaluated sequence.
    BudgetBound { distance: usize, max: usize },
    /// The completion held no usable `\box{...}` answer.
    Unparseable,
    Transport { message: String },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Length { expected, got } => {
                write!(f, "length {got}, expected {expected}")
            }
            RejectReason::NonCanonical => f.write_str("non-canonical residue"),
            RejectReason::IdenticalToParent => f.write_str("identical to a parent"),
            RejectReason::IdenticalToWildType => f.write_str("identical to the wild type"),
            RejectReason::EditBound { distance, max } => {
                write!(f, "{distance} edits from wild type, allowed 1..={max}")
            }
            RejectReason::BudgetBound { distance, max } => {
                write!(f, "{distance} edits from nearest trial, allowed 1..={max}")
            }
            RejectReason::Unparseable => f.write_str("no parseable boxed answer"),
            RejectReason::Transport { message } => write!(f, "transport failure: {message}"),
        }
    }
}

/// An evaluated sequence with its lineage.
///
/// `fitness` is the raw oracle output; `objectives` is what selection acts
/// on (the oracle output, plus the Hamming objective in multi-objective
/// regimes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub sequence: Sequence,
    pub fitness: ObjectiveVector,
    pub objectives: ObjectiveVector,
    pub parents: Option<(Sequence, Sequence)>,
    pub source: Source,
    pub iteration: usize,
}

impl Candidate {
    pub fn primary_fitness(&self) -> f64 {
        self.fitness.primary()
    }
}
