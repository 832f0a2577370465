#![allow(dead_code)]

use std::sync::Arc;

use evoseq::campaign::{JsonlSink, MemorySink, Record};
use evoseq::landscape::{generate_potts_params, PottsLandscape, PottsParams, Sign};
use evoseq::llm::ChatTransport;
use evoseq::propose::{LlmProposer, TaskText};
use evoseq::llm::SamplingParams;
use evoseq::{
    run_campaign, Candidate, CampaignSettings, ObjectiveVector, Oracle, Sequence, Source,
    Trajectory, VariantSpace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seq(s: &str) -> Sequence {
    Sequence::new(s).unwrap()
}

pub fn cand(s: &str, objectives: &[f64]) -> Candidate {
    let v = ObjectiveVector::new(objectives.to_vec()).unwrap();
    Candidate {
        sequence: seq(s),
        fitness: ObjectiveVector::scalar(objectives[0]).unwrap(),
        objectives: v,
        parents: None,
        source: Source::Init,
        iteration: 0,
    }
}

/// A generated Potts landscape over every position with a uniformly drawn
/// wild type.
pub struct Synthetic {
    pub params: PottsParams,
    pub wild_type: Sequence,
    pub oracle: Oracle,
}

pub fn synthetic(length: usize, q: usize, coupling_scale: f64, seed: u64) -> Synthetic {
    let params = generate_potts_params(length, q, 1.0, coupling_scale, 1.0, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let letters = params.alphabet().letters().to_vec();
    let wt: String = (0..length)
        .map(|_| letters[rng.random_range(0..q)] as char)
        .collect();
    let wild_type = seq(&wt);
    let land = PottsLandscape::new("syn", params.clone(), wild_type.clone(), Sign::Plus).unwrap();
    let space = VariantSpace::all_sites("syn", wild_type.clone())
        .with_residues(params.alphabet().clone())
        .unwrap();
    let oracle = Oracle::new(Arc::new(land), space).unwrap();
    Synthetic {
        params,
        wild_type,
        oracle,
    }
}

pub fn run_to_memory(
    settings: &CampaignSettings,
    oracle: &Oracle,
    llm: Option<&LlmProposer>,
) -> (Trajectory, evoseq::campaign::CampaignOutcome) {
    let mut sink = MemorySink::default();
    let out = run_campaign(settings, oracle, llm, &mut sink).unwrap();
    (Trajectory::from_records(sink.records).unwrap(), out)
}

pub fn run_to_bytes(settings: &CampaignSettings, oracle: &Oracle, llm: Option<&LlmProposer>) -> Vec<u8> {
    let mut sink = JsonlSink::new(Vec::new());
    run_campaign(settings, oracle, llm, &mut sink).unwrap();
    sink.into_inner()
}

pub fn proposer(transport: Arc<dyn ChatTransport>, retries: u32) -> LlmProposer {
    LlmProposer::new(
        transport,
        SamplingParams::default(),
        TaskText {
            description: "a generated Potts landscape".into(),
            objective: "score well".into(),
        },
        retries,
    )
}

pub fn records_of(t: &Trajectory) -> &[Record] {
    t.records()
}

/// Every sequence over `letters` of length `len`, in lexicographic order.
pub fn enumerate(letters: &[u8], len: usize) -> Vec<Sequence> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p: Vec<u8>| {
                letters.iter().map(move |&c| {
                    let mut n = p.clone();
                    n.push(c);
                    n
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|b| seq(std::str::from_utf8(&b).unwrap()))
        .collect()
}
