//! Directed-evolution engine for protein sequence optimization.
//!
//! Candidates are proposed by random mutation/crossover or by a chat-model
//! endpoint, scored by pluggable fitness oracles, and selected under
//! single-objective, edit-constrained, budget-constrained, or
//! multi-objective regimes.

pub mod campaign;
pub mod candidate;
pub mod config;
pub mod http;
pub mod landscape;
pub mod llm;
pub mod parallel;
pub mod propose;
pub mod report;
pub mod select;
pub mod seq;

pub use campaign::{run_campaign, CampaignSettings, Trajectory};
pub use candidate::{Candidate, ObjectiveVector, Source};
pub use config::Config;
pub use landscape::{Landscape, Oracle};
pub use parallel::Executor;
pub use select::Regime;
pub use seq::{hamming, Sequence, VariantSpace};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
