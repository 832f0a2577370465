use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{LlmError, PromptBundle};
use crate::http::{JsonClient, RetryPolicy};

pub const API_KEY_ENV: &str = "EVOSEQ_LLM_API_KEY";

const MANIFEST: &str = "manifest.json";

/// Identifies one completion request within a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RequestKey {
    pub iteration: usize,
    pub slot: usize,
    /// 0 for the first try, then one per retry.
    pub attempt: usize,
}

impl RequestKey {
    /// Replay fixture file name: `iter{t}_slot{k}.txt`, with a `.try{n}`
    /// infix for retries.
    pub fn fixture_name(&self) -> String {
        if self.attempt == 0 {
            format!("iter{}_slot{}.txt", self.iteration, self.slot)
        } else {
            format!("iter{}_slot{}.try{}.txt", self.iteration, self.slot, self.attempt)
        }
    }
}

/// Carries a prompt to a chat model and returns the completion text.
/// Implementations must tolerate concurrent calls.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, bundle: &PromptBundle, key: RequestKey) -> Result<String, LlmError>;
}

pub fn chat_complete(
    bundle: &PromptBundle,
    transport: &dyn ChatTransport,
    key: RequestKey,
) -> Result<String, LlmError> {
    transport.complete(bundle, key)
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 2],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

/// OpenAI-compatible `POST {base_url}/chat/completions`. Retries 429 and
/// 5xx answers under the retry policy.
pub struct LiveTransport {
    url: String,
    api_key: Option<String>,
    client: JsonClient,
}

impl std::fmt::Debug for LiveTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveTransport").field("url", &self.url).finish()
    }
}

impl LiveTransport {
    pub fn new(base_url: &str, api_key: Option<String>, policy: RetryPolicy) -> Self {
        Self {
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            client: JsonClient::new(policy),
        }
    }

    /// Reads the bearer key from `EVOSEQ_LLM_API_KEY` when set.
    pub fn from_env(base_url: &str, policy: RetryPolicy) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(base_url, key, policy)
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl ChatTransport for LiveTransport {
    fn complete(&self, bundle: &PromptBundle, _key: RequestKey) -> Result<String, LlmError> {
        let body = ChatRequest {
            model: &bundle.model,
            messages: [
                ChatMessage { role: "system", content: &bundle.system },
                ChatMessage { role: "user", content: &bundle.user },
            ],
            temperature: bundle.temperature,
            max_tokens: bundle.max_tokens,
        };
        let resp: ChatResponse = self.client.post(
            &self.url,
            self.api_key.as_deref(),
            &body,
            |status| status == 429 || status >= 500,
        )?;
        resp.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Response("no choices[0].message.content".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayManifest {
    pub model: String,
    pub fixtures: Vec<String>,
}

/// Serves recorded completions from a fixture directory. Everything is read
/// up front, so replay does no I/O during a campaign.
#[derive(Debug, Clone)]
pub struct ReplayTransport {
    dir: PathBuf,
    manifest: ReplayManifest,
    fixtures: BTreeMap<String, String>,
}

fn io_err(path: &Path, source: std::io::Error) -> LlmError {
    LlmError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl ReplayTransport {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, LlmError> {
        let dir = dir.as_ref().to_path_buf();
        let mpath = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&mpath).map_err(|e| io_err(&mpath, e))?;
        let manifest: ReplayManifest =
            serde_json::from_str(&text).map_err(|e| LlmError::Manifest {
                path: mpath.display().to_string(),
                message: e.to_string(),
            })?;
        let mut fixtures = BTreeMap::new();
        for name in &manifest.fixtures {
            if name.contains('/') || name.contains('\\') || name == MANIFEST {
                return Err(LlmError::Manifest {
                    path: mpath.display().to_string(),
                    message: format!("bad fixture name {name:?}"),
                });
            }
            let p = dir.join(name);
            let body = std::fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
            fixtures.insert(name.clone(), body);
        }
        Ok(Self { dir, manifest, fixtures })
    }

    pub fn manifest(&self) -> &ReplayManifest {
        &self.manifest
    }
}

impl ChatTransport for ReplayTransport {
    fn complete(&self, _bundle: &PromptBundle, key: RequestKey) -> Result<String, LlmError> {
        let name = key.fixture_name();
        self.fixtures
            .get(&name)
            .cloned()
            .ok_or_else(|| LlmError::MissingFixture {
                dir: self.dir.display().to_string(),
                name,
            })
    }
}

type Script = dyn Fn(&PromptBundle, RequestKey) -> Result<String, LlmError> + Send + Sync;

/// A transport driven by a closure, for tests and simulations.
#[derive(Clone)]
pub struct ScriptedTransport {
    script: Arc<Script>,
}

impl ScriptedTransport {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&PromptBundle, RequestKey) -> Result<String, LlmError> + Send + Sync + 'static,
    {
        Self { script: Arc::new(f) }
    }

    /// Always answers `text`.
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new(move |_, _| Ok(text.clone()))
    }
}

impl std::fmt::Debug for ScriptedTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ScriptedTransport")
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&self, bundle: &PromptBundle, key: RequestKey) -> Result<String, LlmError> {
        (self.script)(bundle, key)
    }
}

/// Forwards to another transport and writes each completion as a replay
/// fixture. Call [`RecordingTransport::finish`] to write the manifest.
pub struct RecordingTransport {
    inner: Arc<dyn ChatTransport>,
    dir: PathBuf,
    model: String,
    written: Mutex<Vec<String>>,
}

impl RecordingTransport {
    pub fn new(
        inner: Arc<dyn ChatTransport>,
        dir: impl AsRef<Path>,
        model: impl Into<String>,
    ) -> Result<Self, LlmError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Self {
            inner,
            dir,
            model: model.into(),
            written: Mutex::new(Vec::new()),
        })
    }

    pub fn finish(&self) -> Result<ReplayManifest, LlmError> {
        let mut fixtures = self.written.lock().expect("recording lock poisoned").clone();
        fixtures.sort();
        fixtures.dedup();
        let manifest = ReplayManifest {
            model: self.model.clone(),
            fixtures,
        };
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| LlmError::Response(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(manifest)
    }
}

impl ChatTransport for RecordingTransport {
    fn complete(&self, bundle: &PromptBundle, key: RequestKey) -> Result<String, LlmError> {
        let text = self.inner.complete(bundle, key)?;
        let name = key.fixture_name();
        let path = self.dir.join(&name);
        std::fs::write(&path, &text).map_err(|e| io_err(&path, e))?;
        self.written.lock().expect("recording lock poisoned").push(name);
        Ok(text)
    }
}
