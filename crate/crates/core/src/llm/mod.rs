//! Chat-model proposer plumbing: prompt rendering, answer parsing and the
//! transports that carry requests (live HTTP, recorded replay, scripted).

mod parse;
mod prompt;
mod transport;

use thiserror::Error;

pub use parse::parse_boxed;
pub use prompt::{build_prompt, ParentInfo, PromptBundle, RegimeClause, TaskContext, SYSTEM_PROMPT};
pub use transport::{
    chat_complete, ChatTransport, LiveTransport, RecordingTransport, ReplayManifest,
    ReplayTransport, RequestKey, ScriptedTransport, API_KEY_ENV,
};

use crate::http::HttpError;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("malformed completion response: {0}")]
    Response(String),
    #[error("no replay fixture {name} in {dir}")]
    MissingFixture { dir: String, name: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid replay manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("incomplete prompt context: {0}")]
    Prompt(String),
    #[error("{0}")]
    Scripted(String),
}

/// Sampling settings sent with each request.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplingParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            model: "meta-llama/Llama-3.1-8B-Instruct".into(),
            temperature: 1.0,
            max_tokens: 512,
        }
    }
}
