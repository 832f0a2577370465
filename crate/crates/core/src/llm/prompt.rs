use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{LlmError, SamplingParams};
use crate::seq::Sequence;

pub const SYSTEM_PROMPT: &str = "You are a world-class assistant specializing in protein engineering, fitness optimization, and sequence design. Your expertise lies in analyzing sequence-function relationships, interpreting experimental data, and proposing rational modifications to optimize protein fitness.";

/// The extra instruction added under edit-bounded regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeClause {
    /// Distance to the wild type lies in `1..=h`.
    WildType { h: usize },
    /// Distance to the parents lies in `1..=bh`.
    Parents { bh: usize },
}

impl RegimeClause {
    pub fn sentence(&self) -> String {
        match *self {
            RegimeClause::WildType { h } => format!(
                "The proposed sequence must have a Hamming distance between 1 and {h} from the wild-type sequence."
            ),
            RegimeClause::Parents { bh } => format!(
                "The proposed sequence must have a Hamming distance between 1 and {bh} from the parent sequences."
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParentInfo {
    pub sequence: Sequence,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskContext {
    /// Names the protein, e.g. "B1 domain of streptococcal protein G".
    pub description: String,
    /// Completes "improving protein's ability to ...".
    pub objective: String,
    pub wild_type: Sequence,
    /// 1-based positions of the mutable sites.
    pub sites: Vec<usize>,
    pub parents: [ParentInfo; 2],
    pub clause: Option<RegimeClause>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty",
];

fn count_word(n: usize) -> String {
    NUMBER_WORDS
        .get(n)
        .map(|w| w.to_string())
        .unwrap_or_else(|| n.to_string())
}

/// "39", "39 and 40", "39, 40, 41, and 54".
fn english_list(items: &[usize]) -> String {
    let s: Vec<String> = items.iter().map(|i| i.to_string()).collect();
    match s.len() {
        0 => String::new(),
        1 => s[0].clone(),
        2 => format!("{} and {}", s[0], s[1]),
        n => format!("{}, and {}", s[..n - 1].join(", "), s[n - 1]),
    }
}

/// Renders the chat prompt. Pure: equal contexts give byte-identical output.
pub fn build_prompt(ctx: &TaskContext, sampling: &SamplingParams) -> Result<PromptBundle, LlmError> {
    if ctx.description.trim().is_empty() {
        return Err(LlmError::Prompt("dataset description is empty".into()));
    }
    if ctx.objective.trim().is_empty() {
        return Err(LlmError::Prompt("objective is empty".into()));
    }
    if ctx.sites.is_empty() {
        return Err(LlmError::Prompt("no mutable sites".into()));
    }
    let arity = ctx.parents[0].sequence.len();
    if ctx.parents[1].sequence.len() != arity || arity != ctx.sites.len() {
        return Err(LlmError::Prompt(format!(
            "parent lengths {} and {} do not match {} sites",
            arity,
            ctx.parents[1].sequence.len(),
            ctx.sites.len()
        )));
    }

    let mut u = String::new();
    // write! into a String cannot fail
    let _ = write!(
        u,
        "You will carry out a multi-round directed evolution experiment with the following protein sequence, aimed at improving protein's ability to {} via protein fitness optimization.\n\n",
        ctx.objective.trim()
    );
    u.push_str("### Protein fitness optimization\n\n");
    u.push_str("The fitness score reflects the efficacy or functionality for a desired application, from chemical synthesis to bioremediation and therapeutics. Protein fitness optimization can be thought of as navigating a protein fitness landscape, a mapping of amino acid sequences to fitness values, to find higher-fitness variants. Specifically, it is achieved by making crossover and mutations on the given sequences.\n\n");
    let _ = write!(
        u,
        "We are focusing on changes to a limited subset of amino acids within the sequence. The provided subset protein sequences come from {}, with sequence:\n\n```\n{}\n```\n\n",
        ctx.description.trim(),
        ctx.wild_type
    );
    let _ = write!(
        u,
        "Each subset protein sequence represents specific amino acid substitutions at {} key positions: {}, denoted using the single-letter amino acid code.\n\n",
        count_word(ctx.sites.len()),
        english_list(&ctx.sites)
    );
    u.push_str("### Parent protein sequences\n\n");
    let _ = write!(
        u,
        "Here are the parent protein sequences that you will be modifying from. Each sequence comes with {arity} amino acids and its fitness score is also provided.\n\n"
    );
    for (i, p) in ctx.parents.iter().enumerate() {
        let _ = write!(
            u,
            "Protein sequence {} (fitness score: {:.4})\n\n```\n{}\n```\n\n",
            i + 1,
            p.fitness,
            p.sequence.spaced()
        );
    }
    u.push_str("### Instructions\n\n");
    u.push_str("Follow the instructions below to propose a new protein:\n\n");
    let mut bullets = vec![
        "Your proposal should focus on maximizing fitness and minimizing humming distance from the wild type while considering structural and functional plausibility.".to_string(),
        "You can propose it via making crossover or mutation on the parent sequences.".to_string(),
        "You can also propose a new sequence based on your knowledge.".to_string(),
        "Your proposed sequence MUST have the same length as the parent sequences.".to_string(),
    ];
    if let Some(clause) = ctx.clause {
        bullets.push(clause.sentence());
    }
    bullets.push(
        "DO NOT propose sequence that is identical with the parent or the wild type sequences."
            .to_string(),
    );
    bullets.push("Your output MUST ONLY include: \\box{{Protein}}.".to_string());
    let body: Vec<String> = bullets.iter().map(|b| format!("* {b}")).collect();
    u.push_str(&body.join("\n\n"));
    u.push('\n');

    Ok(PromptBundle {
        system: SYSTEM_PROMPT.to_string(),
        user: u,
        model: sampling.model.clone(),
        temperature: sampling.temperature,
        max_tokens: sampling.max_tokens,
    })
}
