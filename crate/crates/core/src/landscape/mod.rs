//! Fitness oracles: exact lookup tables, Potts-model synthetic landscapes
//! and external HTTP scorers, plus evaluation bookkeeping.

mod exact;
mod external;
mod ledger;
mod potts;

use std::sync::Arc;

use thiserror::Error;

pub use exact::{
    load_exact_landscape, position_combination_stats, write_stats_csv, CombinationStat,
    ExactLandscape, MissingPolicy,
};
pub use external::{ExternalOracle, ScoreRequest, ScoreResponse};
pub use ledger::{EvaluationLedger, Evaluated, Pending};
pub use potts::{
    calibrate_sign, generate_potts_params, potts_energy, potts_fitness, CouplingBlock,
    PottsLandscape, PottsParams, Sign,
};

use crate::candidate::{ObjectiveError, ObjectiveVector};
use crate::parallel::Executor;
use crate::seq::{SeqError, Sequence, VariantSpace};

#[derive(Debug, Error)]
pub enum LandscapeError {
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: no records")]
    NoRecords { path: String },
    #[error("variant {0} is not in the landscape table")]
    UnknownVariant(String),
    #[error("oracle returned a non-finite score for {0}")]
    NonFiniteScore(String),
    #[error("expected a sequence of length {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("oracle transport failure: {0}")]
    Transport(String),
    #[error("invalid landscape: {0}")]
    Invalid(String),
}

/// What length of sequence a landscape consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    /// Site-restricted variants (exact tables).
    Variant(usize),
    /// Full-length sequences (Potts, ML oracles).
    Full(usize),
}

impl Arity {
    pub fn len(&self) -> usize {
        match *self {
            Arity::Variant(n) | Arity::Full(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn check(&self, seq: &Sequence) -> Result<(), LandscapeError> {
        if seq.len() != self.len() {
            return Err(LandscapeError::Arity {
                expected: self.len(),
                got: seq.len(),
            });
        }
        Ok(())
    }
}

/// A deterministic fitness evaluator.
pub trait Landscape: Send + Sync {
    fn name(&self) -> &str;

    fn arity(&self) -> Arity;

    fn evaluate(&self, seq: &Sequence) -> Result<ObjectiveVector, LandscapeError>;

    /// Scores a batch in input order. The default fans single evaluations
    /// out over `exec`.
    fn evaluate_batch(
        &self,
        seqs: &[Sequence],
        exec: &Executor,
    ) -> Result<Vec<ObjectiveVector>, LandscapeError> {
        exec.try_map_slice(seqs, |s| self.evaluate(s))
    }
}

/// A min-max normalized value and whether clamping was needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalized {
    pub value: f64,
    pub clamped: bool,
}

/// `(x - lo) / (hi - lo)`, clamped into `[0, 1]`.
pub fn minmax_normalize(x: f64, lo: f64, hi: f64) -> Result<Normalized, LandscapeError> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(LandscapeError::Invalid(format!(
            "normalization bounds need lo < hi, got lo={lo} hi={hi}"
        )));
    }
    let raw = (x - lo) / (hi - lo);
    let value = raw.clamp(0.0, 1.0);
    Ok(Normalized {
        value,
        clamped: value != raw,
    })
}

/// A landscape bound to the variant space the campaign searches, so callers
/// always hand it site-restricted variants.
#[derive(Clone)]
pub struct Oracle {
    landscape: Arc<dyn Landscape>,
    space: VariantSpace,
    normalize: Option<(f64, f64)>,
}

impl std::fmt::Debug for Oracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Oracle")
            .field("landscape", &self.landscape.name())
            .field("space", &self.space.name())
            .field("normalize", &self.normalize)
            .finish()
    }
}

impl Oracle {
    pub fn new(landscape: Arc<dyn Landscape>, space: VariantSpace) -> Result<Self, LandscapeError> {
        let expected = match landscape.arity() {
            Arity::Variant(n) => (n, space.arity()),
            Arity::Full(n) => (n, space.wild_type().len()),
        };
        if expected.0 != expected.1 {
            return Err(LandscapeError::Arity {
                expected: expected.0,
                got: expected.1,
            });
        }
        Ok(Self {
            landscape,
            space,
            normalize: None,
        })
    }

    /// Min-max normalize every score into `[0, 1]`.
    pub fn with_normalization(mut self, lo: f64, hi: f64) -> Result<Self, LandscapeError> {
        minmax_normalize(lo, lo, hi)?;
        self.normalize = Some((lo, hi));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        self.landscape.name()
    }

    pub fn space(&self) -> &VariantSpace {
        &self.space
    }

    pub fn landscape(&self) -> &Arc<dyn Landscape> {
        &self.landscape
    }

    pub fn score_variants(
        &self,
        variants: &[Sequence],
        exec: &Executor,
    ) -> Result<Vec<ObjectiveVector>, LandscapeError> {
        let inputs: Vec<Sequence> = match self.landscape.arity() {
            Arity::Variant(_) => variants.to_vec(),
            Arity::Full(_) => variants
                .iter()
                .map(|v| self.space.apply_variant(v))
                .collect::<Result<_, _>>()?,
        };
        let scores = self.landscape.evaluate_batch(&inputs, exec)?;
        match self.normalize {
            None => Ok(scores),
            Some((lo, hi)) => scores
                .into_iter()
                .map(|v| {
                    let values = v
                        .values()
                        .iter()
                        .map(|&x| minmax_normalize(x, lo, hi).map(|n| n.value))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(ObjectiveVector::new(values)?)
                })
                .collect(),
        }
    }
}
