//! Offspring generation: the mutation/crossover operator pair and the
//! chat-model proposer with validation, retries and fallback.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate::{Candidate, RejectReason, Source};
use crate::llm::{
    build_prompt, parse_boxed, ChatTransport, LlmError, ParentInfo, RegimeClause, RequestKey,
    SamplingParams, TaskContext,
};
use crate::select::Regime;
use crate::seq::{crossover_with, mutate_within, ResidueSet, SeqError, Sequence, VariantSpace};

#[derive(Debug, Error)]
pub enum ProposeError {
    #[error("cannot draw parents from an empty pool")]
    EmptyPool,
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error("invalid proposer setting: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposerConfig {
    /// Probability `r_m` of adding a point mutant of the first parent.
    pub mutation_rate: f64,
    /// Share of crossovers that are uniform rather than one-point.
    pub uniform_crossover: f64,
    pub llm_enabled: bool,
    /// Extra attempts after a parse or validation failure.
    pub max_llm_retries: u32,
}

impl Default for ProposerConfig {
    fn default() -> Self {
        Self {
            mutation_rate: 0.5,
            uniform_crossover: 0.5,
            llm_enabled: false,
            max_llm_retries: 2,
        }
    }
}

impl ProposerConfig {
    pub fn validate(&self) -> Result<(), ProposeError> {
        for (name, p) in [
            ("mutation_rate", self.mutation_rate),
            ("uniform_crossover", self.uniform_crossover),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ProposeError::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// A generated sequence before validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Offspring {
    pub sequence: Sequence,
    pub source: Source,
}

/// An offspring that passed [`validate_proposal`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub sequence: Sequence,
    pub parents: (Sequence, Sequence),
    pub source: Source,
    pub iteration: usize,
    pub slot: usize,
}

/// Two independent uniform draws from the pool (they may coincide).
pub fn draw_parents<'a, R: Rng + ?Sized>(
    pool: &'a [Candidate],
    rng: &mut R,
) -> Result<(&'a Candidate, &'a Candidate), ProposeError> {
    if pool.is_empty() {
        return Err(ProposeError::EmptyPool);
    }
    let a = rng.random_range(0..pool.len());
    let b = rng.random_range(0..pool.len());
    Ok((&pool[a], &pool[b]))
}

/// The crossover child, followed by a point mutant of `s0` when a uniform
/// draw falls at or below the mutation rate.
pub fn ea_offspring<R: Rng + ?Sized>(
    s0: &Sequence,
    s1: &Sequence,
    residues: &ResidueSet,
    config: &ProposerConfig,
    rng: &mut R,
) -> Result<Vec<Offspring>, ProposeError> {
    let mut out = vec![Offspring {
        sequence: crossover_with(s0, s1, config.uniform_crossover, rng)?,
        source: Source::Crossover,
    }];
    let r: f64 = rng.random();
    if r <= config.mutation_rate && config.mutation_rate > 0.0 {
        out.push(Offspring {
            sequence: mutate_within(s0, residues, rng),
            source: Source::Mutation,
        });
    }
    Ok(out)
}

/// Accepts `seq` when it has the space's arity, uses only the space's
/// residues, and differs from both parents and the wild type.
pub fn validate_proposal(
    seq: &Sequence,
    s0: &Sequence,
    s1: &Sequence,
    wild_variant: &Sequence,
    space: &VariantSpace,
) -> Result<(), RejectReason> {
    if seq.len() != space.arity() {
        return Err(RejectReason::Length {
            expected: space.arity(),
            got: seq.len(),
        });
    }
    if !seq.as_bytes().iter().all(|&b| space.residues().contains(b)) {
        return Err(RejectReason::NonCanonical);
    }
    if seq == s0 || seq == s1 {
        return Err(RejectReason::IdenticalToParent);
    }
    if seq == wild_variant {
        return Err(RejectReason::IdenticalToWildType);
    }
    Ok(())
}

/// One request/response round with the chat model.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmAttempt {
    pub attempt: usize,
    pub completion: Option<String>,
    /// The boxed answer, when one parsed.
    pub parsed: Option<Sequence>,
    pub result: Result<Sequence, RejectReason>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LlmOutcome {
    pub sequence: Option<Sequence>,
    pub attempts: Vec<LlmAttempt>,
}

/// Wording that describes the task to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskText {
    pub description: String,
    pub objective: String,
}

pub struct LlmProposer {
    transport: Arc<dyn ChatTransport>,
    sampling: SamplingParams,
    text: TaskText,
    max_retries: u32,
}

impl std::fmt::Debug for LlmProposer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmProposer")
            .field("sampling", &self.sampling)
            .field("max_retries", &self.max_retries)
            .finish()
    }
}

impl LlmProposer {
    pub fn new(
        transport: Arc<dyn ChatTransport>,
        sampling: SamplingParams,
        text: TaskText,
        max_retries: u32,
    ) -> Self {
        Self {
            transport,
            sampling,
            text,
            max_retries,
        }
    }

    pub fn context(
        &self,
        space: &VariantSpace,
        regime: &Regime,
        s0: &Candidate,
        s1: &Candidate,
    ) -> TaskContext {
        let clause = match *regime {
            Regime::Constrained { h } => Some(RegimeClause::WildType { h }),
            Regime::Budget { bh } => Some(RegimeClause::Parents { bh }),
            _ => None,
        };
        TaskContext {
            description: self.text.description.clone(),
            objective: self.text.objective.clone(),
            wild_type: space.wild_type().clone(),
            sites: space.one_based_sites(),
            parents: [
                ParentInfo {
                    sequence: s0.sequence.clone(),
                    fitness: s0.primary_fitness(),
                },
                ParentInfo {
                    sequence: s1.sequence.clone(),
                    fitness: s1.primary_fitness(),
                },
            ],
            clause,
        }
    }

    /// Asks for one proposal. Parse and validation failures consume an
    /// attempt; a transport failure ends the slot's LLM branch at once.
    /// Returns `sequence: None` when no attempt produced a valid answer.
    pub fn propose(
        &self,
        space: &VariantSpace,
        regime: &Regime,
        s0: &Candidate,
        s1: &Candidate,
        iteration: usize,
        slot: usize,
    ) -> Result<LlmOutcome, LlmError> {
        let bundle = build_prompt(&self.context(space, regime, s0, s1), &self.sampling)?;
        let wild = space.wild_variant();
        let mut out = LlmOutcome::default();
        for attempt in 0..=self.max_retries as usize {
            let key = RequestKey { iteration, slot, attempt };
            let text = match self.transport.complete(&bundle, key) {
                Ok(t) => t,
                Err(e) => {
                    log::warn!("iteration {iteration} slot {slot}: LLM transport failed: {e}");
                    out.attempts.push(LlmAttempt {
                        attempt,
                        completion: None,
                        parsed: None,
                        result: Err(RejectReason::Transport { message: e.to_string() }),
                    });
                    return Ok(out);
                }
            };
            let parsed = parse_boxed(&text, space.arity());
            let result = match &parsed {
                None => Err(RejectReason::Unparseable),
                Some(seq) => validate_proposal(seq, &s0.sequence, &s1.sequence, &wild, space)
                    .map(|()| seq.clone()),
            };
            let accepted = result.as_ref().ok().cloned();
            out.attempts.push(LlmAttempt {
                attempt,
                completion: Some(text),
                parsed,
                result,
            });
            if let Some(seq) = accepted {
                out.sequence = Some(seq);
                return Ok(out);
            }
        }
        Ok(out)
    }
}
