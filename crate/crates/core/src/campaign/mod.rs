//! The propose / evaluate / select loop, initial pools, and the trajectory
//! every report is derived from.

mod metrics;
mod trajectory;

use std::collections::HashSet;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use metrics::{
    aggregate_seeds, mean_std, topk_mean, topk_mean_of, MetricError, MetricSummary, StdKind,
};
pub use trajectory::{
    write_trajectory, EvaluationInfo, Event, InitInfo, JsonlSink, MemorySink, MetricsInfo,
    ProposalInfo, Record, RejectionInfo, SelectionInfo, Stage, TopK, Trajectory, TrajectoryError,
    TrajectorySink,
};

use crate::candidate::{Candidate, ObjectiveError, ObjectiveVector, Source};
use crate::landscape::{EvaluationLedger, LandscapeError, Oracle, Pending};
use crate::llm::LlmError;
use crate::parallel::Executor;
use crate::propose::{
    draw_parents, ea_offspring, validate_proposal, LlmOutcome, LlmProposer, Offspring,
    ProposeError, ProposerConfig,
};
use crate::select::{check_budget, check_constrained, next_pool, Regime, SelectError};
use crate::seq::{hamming_unchecked, Sequence, VariantSpace};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign setting: {0}")]
    Config(String),
    #[error("initial pool: {0}")]
    Init(String),
    #[error("oracle failure: {0}")]
    Oracle(#[from] LandscapeError),
    #[error("LLM proposer failure: {0}")]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Propose(#[from] ProposeError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("writing trajectory: {0}")]
    Io(#[from] std::io::Error),
}

/// How the starting population is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode {
    /// Distinct uniform draws from the whole variant space.
    RandomSpace,
    /// Distinct single mutants of the wild type.
    SingleMutant,
    /// Rows of a candidate table whose fitness lies in `fitness_range` and
    /// whose Hamming distance to the table's best row exceeds `min_gap`.
    FilteredPool {
        candidates: Vec<(Sequence, f64)>,
        fitness_range: (f64, f64),
        min_gap: usize,
    },
}

impl InitMode {
    pub fn name(&self) -> &'static str {
        match self {
            InitMode::RandomSpace => "random_space",
            InitMode::SingleMutant => "single_mutant",
            InitMode::FilteredPool { .. } => "filtered_pool",
        }
    }
}

/// Timestamp source for trajectory records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    /// Event ordinal; keeps fixed-seed trajectories byte-identical.
    #[default]
    Logical,
    /// Milliseconds since the Unix epoch.
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSettings {
    /// Population size K; also the number of proposal slots per iteration.
    pub population: usize,
    /// Iterations N.
    pub iterations: usize,
    pub seed: u64,
    pub regime: Regime,
    pub proposer: ProposerConfig,
    pub init: InitMode,
    /// Worker threads; 0 uses the global pool, 1 runs sequentially.
    pub threads: usize,
    pub clock: Clock,
    /// k values reported in the final metrics record.
    pub topk: Vec<usize>,
    /// Identifies the configuration across seeds. Derived from the other
    /// fields when `None`.
    pub fingerprint: Option<String>,
}

impl CampaignSettings {
    pub fn new(population: usize, iterations: usize, seed: u64, regime: Regime) -> Self {
        Self {
            population,
            iterations,
            seed,
            regime,
            proposer: ProposerConfig::default(),
            init: InitMode::RandomSpace,
            threads: 0,
            clock: Clock::Logical,
            topk: vec![1, 10, 50],
            fingerprint: None,
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.population < 1 {
            return Err(CampaignError::Config("population must be at least 1".into()));
        }
        if self.iterations < 1 {
            return Err(CampaignError::Config("iterations must be at least 1".into()));
        }
        if self.topk.contains(&0) {
            return Err(CampaignError::Config("top-k values must be at least 1".into()));
        }
        self.regime.validate()?;
        self.proposer.validate()?;
        if let InitMode::FilteredPool { fitness_range: (lo, hi), .. } = &self.init {
            if !(lo <= hi) {
                return Err(CampaignError::Config(format!(
                    "fitness_range lower bound {lo} exceeds upper bound {hi}"
                )));
            }
        }
        Ok(())
    }

    /// Seed-independent identity of the run configuration.
    pub fn fingerprint(&self, oracle: &Oracle) -> String {
        if let Some(f) = &self.fingerprint {
            return f.clone();
        }
        let mut neutral = self.clone();
        neutral.seed = 0;
        neutral.threads = 0;
        neutral.clock = Clock::Logical;
        let space = oracle.space();
        let text = format!(
            "{}|{}|{}|{:?}|{}|{}",
            serde_json::to_string(&neutral).unwrap_or_default(),
            oracle.name(),
            space.wild_type(),
            space.one_based_sites(),
            space.residues().as_str(),
            space.name()
        );
        short_hash(text.as_bytes())
    }
}

fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn campaign_id(fingerprint: &str, seed: u64) -> String {
    short_hash(format!("{fingerprint}:{seed}").as_bytes())
}

/// Random stream for `(iteration, slot)`; iteration 0 is the initial pool.
pub fn slot_rng(seed: u64, iteration: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = if iteration == 0 {
        0
    } else {
        ((iteration as u64) << 32) | (slot as u64 + 1)
    };
    rng.set_stream(stream);
    rng
}

/// Draws the initial variants (unevaluated).
pub fn initial_variants<R: Rng + ?Sized>(
    init: &InitMode,
    space: &VariantSpace,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Sequence>, CampaignError> {
    match init {
        InitMode::RandomSpace => {
            if space.size() < k as u128 {
                return Err(CampaignError::Init(format!(
                    "population {k} exceeds the {} variants in the space",
                    space.size()
                )));
            }
            let mut seen = HashSet::new();
            let mut out = Vec::with_capacity(k);
            while out.len() < k {
                let v = space.random_variant(rng);
                if seen.insert(v.clone()) {
                    out.push(v);
                }
            }
            Ok(out)
        }
        InitMode::SingleMutant => {
            let wild = space.wild_variant();
            let letters = space.residues().letters();
            let alternatives = letters.len() - 1;
            let total = space.arity() * alternatives;
            if k > total {
                return Err(CampaignError::Init(format!(
                    "population {k} exceeds the {total} single mutants of the wild type"
                )));
            }
            let picks = sample(rng, total, k);
            Ok(picks
                .into_iter()
                .map(|i| {
                    let site = i / alternatives;
                    let current = wild.residue(site);
                    let replacement = letters
                        .iter()
                        .copied()
                        .filter(|&l| l != current)
                        .nth(i % alternatives)
                        .expect("index below alternatives");
                    wild.with_residue(site, replacement).expect("residue from the space")
                })
                .collect())
        }
        InitMode::FilteredPool {
            candidates,
            fitness_range: (lo, hi),
            min_gap,
        } => {
            let best = candidates
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .ok_or_else(|| CampaignError::Init("candidate table is empty".into()))?;
            let order = sample(rng, candidates.len(), candidates.len());
            let mut seen = HashSet::new();
            let mut out = Vec::with_capacity(k);
            let mut examined = 0usize;
            for i in order {
                if out.len() == k {
                    break;
                }
                examined += 1;
                let (s, f) = &candidates[i];
                if s.len() != space.arity()
                    || !s.as_bytes().iter().all(|&b| space.residues().contains(b))
                {
                    return Err(CampaignError::Init(format!(
                        "candidate {s} does not belong to the variant space"
                    )));
                }
                let gap = hamming_unchecked(s.as_bytes(), best.0.as_bytes());
                if *f >= *lo && *f <= *hi && gap > *min_gap && seen.insert(s.clone()) {
                    out.push(s.clone());
                }
            }
            if out.len() < k {
                return Err(CampaignError::Init(format!(
                    "only {} of {} candidates passed the filters (fitness in [{lo}, {hi}], gap > {min_gap}); population needs {k}",
                    out.len(),
                    examined
                )));
            }
            Ok(out)
        }
    }
}

/// What a campaign left behind besides its trajectory.
#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub campaign_id: String,
    pub pool: Vec<Candidate>,
    pub ledger: EvaluationLedger,
    pub stalled_iterations: Vec<usize>,
    pub metrics: MetricsInfo,
}

struct Emitter<'a> {
    sink: &'a mut dyn TrajectorySink,
    id: String,
    clock: Clock,
    events: u64,
}

impl Emitter<'_> {
    fn emit(&mut self, iteration: usize, event: Event) -> std::io::Result<()> {
        let timestamp = match self.clock {
            Clock::Logical => self.events,
            Clock::Wall => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        };
        self.events += 1;
        self.sink.write(&Record {
            campaign_id: self.id.clone(),
            iteration,
            timestamp,
            event,
        })
    }
}

struct SlotOutput {
    parents: [Sequence; 2],
    llm: Option<LlmOutcome>,
    offspring: Vec<Offspring>,
}

struct RunState {
    pool: Vec<Candidate>,
    ledger: EvaluationLedger,
    stalled: Vec<usize>,
    iteration: usize,
}

/// Runs one campaign, streaming every event to `sink`. On failure the
/// trajectory ends with a metrics record marked incomplete.
pub fn run_campaign(
    settings: &CampaignSettings,
    oracle: &Oracle,
    llm: Option<&LlmProposer>,
    sink: &mut dyn TrajectorySink,
) -> Result<CampaignOutcome, CampaignError> {
    settings.validate()?;
    if settings.proposer.llm_enabled && llm.is_none() {
        return Err(CampaignError::Config(
            "llm_enabled is set but no LLM proposer was supplied".into(),
        ));
    }
    let llm = if settings.proposer.llm_enabled { llm } else { None };
    let fingerprint = settings.fingerprint(oracle);
    let id = campaign_id(&fingerprint, settings.seed);
    let mut out = Emitter {
        sink,
        id: id.clone(),
        clock: settings.clock,
        events: 0,
    };
    let space = oracle.space();
    let span = space.arity();
    out.emit(
        0,
        Event::Init(InitInfo {
            config_fingerprint: fingerprint,
            seed: settings.seed,
            landscape: oracle.name().to_string(),
            space: space.name().to_string(),
            wild_variant: space.wild_variant(),
            sites: space.one_based_sites(),
            residues: space.residues().as_str().to_string(),
            regime: settings.regime.clone(),
            population: settings.population,
            iterations: settings.iterations,
            mutation_rate: settings.proposer.mutation_rate,
            llm_enabled: llm.is_some(),
            init_mode: settings.init.name().to_string(),
            objectives: if settings.regime.is_multi_objective() { 2 } else { 1 },
        }),
    )?;

    let mut state = RunState {
        pool: Vec::new(),
        ledger: EvaluationLedger::new(oracle.name()),
        stalled: Vec::new(),
        iteration: 0,
    };
    let result = drive(settings, oracle, llm, &mut out, &mut state, span);
    let (complete, error) = match &result {
        Ok(()) => (true, None),
        Err(e) => (false, Some(e.to_string())),
    };
    let metrics = final_metrics(settings, &state, complete, error);
    out.emit(state.iteration, Event::Metrics(metrics.clone()))?;
    result?;
    Ok(CampaignOutcome {
        campaign_id: id,
        pool: state.pool,
        ledger: state.ledger,
        stalled_iterations: state.stalled,
        metrics,
    })
}

fn final_metrics(
    settings: &CampaignSettings,
    state: &RunState,
    complete: bool,
    error: Option<String>,
) -> MetricsInfo {
    let values: Vec<f64> = state.ledger.records().iter().map(|c| c.primary_fitness()).collect();
    let best = state
        .ledger
        .records()
        .iter()
        .max_by(|a, b| {
            a.primary_fitness()
                .total_cmp(&b.primary_fitness())
                .then_with(|| b.sequence.cmp(&a.sequence))
        });
    MetricsInfo {
        complete,
        error,
        evaluations: state.ledger.len(),
        oracle_calls: state.ledger.call_count(),
        stalled_iterations: state.stalled.clone(),
        topk: settings
            .topk
            .iter()
            .filter_map(|&k| topk_mean_of(&values, k).ok().map(|mean| TopK { k, mean }))
            .collect(),
        best_sequence: best.map(|c| c.sequence.clone()),
        best_fitness: best.map(|c| c.primary_fitness()),
    }
}

fn selection_event(pool: &[Candidate], stalled: bool) -> Event {
    Event::Selection(SelectionInfo {
        stalled,
        pool: pool.iter().map(|c| c.sequence.clone()).collect(),
        pool_fitness: pool.iter().map(|c| c.primary_fitness()).collect(),
    })
}

fn evaluation_event(c: &Candidate, cached: bool, slot: Option<usize>) -> Event {
    Event::Evaluation(EvaluationInfo {
        sequence: c.sequence.clone(),
        source: c.source,
        fitness: c.fitness.clone(),
        objectives: c.objectives.clone(),
        cached,
        slot,
        parents: c.parents.clone().map(|(a, b)| [a, b]),
    })
}

fn drive(
    settings: &CampaignSettings,
    oracle: &Oracle,
    llm: Option<&LlmProposer>,
    out: &mut Emitter<'_>,
    state: &mut RunState,
    span: usize,
) -> Result<(), CampaignError> {
    let space = oracle.space();
    let wild = space.wild_variant();
    let exec = Executor::new(settings.threads);
    let multi = settings.regime.is_multi_objective();
    let derive = |x: &Sequence, f: &ObjectiveVector| -> Result<ObjectiveVector, ObjectiveError> {
        if multi {
            let d = hamming_unchecked(x.as_bytes(), wild.as_bytes());
            f.extended(1.0 - d as f64 / span as f64)
        } else {
            Ok(f.clone())
        }
    };

    let mut rng = slot_rng(settings.seed, 0, 0);
    let variants = initial_variants(&settings.init, space, settings.population, &mut rng)?;
    let pending: Vec<Pending> = variants.into_iter().map(Pending::init).collect();
    let evaluated = state.ledger.evaluate(oracle, &exec, 0, &pending, derive)?;
    for e in &evaluated {
        out.emit(0, evaluation_event(&e.candidate, e.cached, None))?;
    }
    state.pool = evaluated.into_iter().map(|e| e.candidate).collect();
    out.emit(0, selection_event(&state.pool, false))?;

    for t in 1..=settings.iterations {
        state.iteration = t;
        let pool = &state.pool;
        let slots: Vec<Result<SlotOutput, CampaignError>> =
            exec.map_indexed(settings.population, |k| {
                let mut rng = slot_rng(settings.seed, t, k);
                let (p0, p1) = draw_parents(pool, &mut rng)?;
                let parents = [p0.sequence.clone(), p1.sequence.clone()];
                let llm_out = match llm {
                    Some(l) => Some(l.propose(space, &settings.regime, p0, p1, t, k)?),
                    None => None,
                };
                let offspring = match llm_out.as_ref().and_then(|o| o.sequence.clone()) {
                    Some(seq) => vec![Offspring {
                        sequence: seq,
                        source: Source::Llm,
                    }],
                    None => ea_offspring(
                        &parents[0],
                        &parents[1],
                        space.residues(),
                        &settings.proposer,
                        &mut rng,
                    )?,
                };
                Ok(SlotOutput {
                    parents,
                    llm: llm_out,
                    offspring,
                })
            });

        let mut accepted: Vec<(usize, Pending)> = Vec::new();
        for (k, slot) in slots.into_iter().enumerate() {
            let slot = slot?;
            let [a, b] = &slot.parents;
            let mut attempt_of_llm = None;
            if let Some(o) = &slot.llm {
                for at in &o.attempts {
                    match &at.result {
                        Ok(_) => attempt_of_llm = Some(at.attempt),
                        Err(reason) => out.emit(
                            t,
                            Event::Rejection(RejectionInfo {
                                slot: k,
                                source: Source::Llm,
                                stage: Stage::Llm,
                                sequence: at.parsed.clone(),
                                parents: slot.parents.clone(),
                                attempt: Some(at.attempt),
                                reason: reason.clone(),
                            }),
                        )?,
                    }
                }
            }
            for off in slot.offspring {
                if let Err(reason) = validate_proposal(&off.sequence, a, b, &wild, space) {
                    out.emit(
                        t,
                        Event::Rejection(RejectionInfo {
                            slot: k,
                            source: off.source,
                            stage: Stage::Validate,
                            sequence: Some(off.sequence),
                            parents: slot.parents.clone(),
                            attempt: None,
                            reason,
                        }),
                    )?;
                    continue;
                }
                let attempt = (off.source == Source::Llm).then_some(attempt_of_llm).flatten();
                out.emit(
                    t,
                    Event::Proposal(ProposalInfo {
                        slot: k,
                        source: off.source,
                        sequence: off.sequence.clone(),
                        parents: slot.parents.clone(),
                        attempt,
                    }),
                )?;
                let bound = match settings.regime {
                    Regime::Constrained { h } => check_constrained(&off.sequence, &wild, h),
                    Regime::Budget { bh } => check_budget(&off.sequence, &state.ledger, bh),
                    _ => Ok(()),
                };
                match bound {
                    Ok(()) => accepted.push((
                        k,
                        Pending {
                            sequence: off.sequence,
                            parents: Some((a.clone(), b.clone())),
                            source: off.source,
                        },
                    )),
                    Err(reason) => out.emit(
                        t,
                        Event::Rejection(RejectionInfo {
                            slot: k,
                            source: off.source,
                            stage: Stage::Regime,
                            sequence: Some(off.sequence),
                            parents: slot.parents.clone(),
                            attempt,
                            reason,
                        }),
                    )?,
                }
            }
        }

        if accepted.is_empty() {
            log::info!("iteration {t}: every proposal was rejected; pool carried over");
            state.stalled.push(t);
            out.emit(t, selection_event(&state.pool, true))?;
            continue;
        }
        let pending: Vec<Pending> = accepted.iter().map(|(_, p)| p.clone()).collect();
        let evaluated = state.ledger.evaluate(oracle, &exec, t, &pending, derive)?;
        for ((k, _), e) in accepted.iter().zip(&evaluated) {
            out.emit(t, evaluation_event(&e.candidate, e.cached, Some(*k)))?;
        }
        let offspring: Vec<Candidate> = evaluated.into_iter().map(|e| e.candidate).collect();
        state.pool = next_pool(&settings.regime, &state.pool, &offspring, settings.population)?;
        out.emit(t, selection_event(&state.pool, false))?;
    }
    Ok(())
}
