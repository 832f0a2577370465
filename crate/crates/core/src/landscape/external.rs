use serde::{Deserialize, Serialize};

use super::{Arity, Landscape, LandscapeError};
use crate::candidate::ObjectiveVector;
use crate::http::{JsonClient, RetryPolicy};
use crate::parallel::Executor;
use crate::seq::Sequence;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub sequences: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<Option<f64>>,
}

/// A remote model scored through `POST {base_url}/score`. Any non-200
/// answer is retried under the configured backoff.
pub struct ExternalOracle {
    name: String,
    url: String,
    length: usize,
    client: JsonClient,
}

impl std::fmt::Debug for ExternalOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalOracle")
            .field("name", &self.name)
            .field("url", &self.url)
            .finish()
    }
}

impl ExternalOracle {
    pub fn new(
        name: impl Into<String>,
        base_url: &str,
        sequence_length: usize,
        policy: RetryPolicy,
    ) -> Self {
        Self {
            name: name.into(),
            url: format!("{}/score", base_url.trim_end_matches('/')),
            length: sequence_length,
            client: JsonClient::new(policy),
        }
    }

    pub fn external_evaluate(
        &self,
        batch: &[Sequence],
    ) -> Result<Vec<ObjectiveVector>, LandscapeError> {
        if batch.is_empty() {
            return Err(LandscapeError::Invalid("empty scoring batch".into()));
        }
        for s in batch {
            self.arity().check(s)?;
        }
        let request = ScoreRequest {
            sequences: batch.iter().map(|s| s.to_string()).collect(),
        };
        let text = self
            .client
            .post_text(&self.url, None, &request, |_| true)
            .map_err(|e| LandscapeError::Transport(e.to_string()))?;
        let response = parse_scores(&text).map_err(|e| {
            LandscapeError::Transport(format!("{}: malformed score response: {e}", self.url))
        })?;
        if response.scores.len() != batch.len() {
            return Err(LandscapeError::Transport(format!(
                "{} returned {} scores for {} sequences",
                self.url,
                response.scores.len(),
                batch.len()
            )));
        }
        batch
            .iter()
            .zip(response.scores)
            .map(|(s, score)| match score {
                Some(v) if v.is_finite() => Ok(ObjectiveVector::scalar(v)?),
                _ => Err(LandscapeError::NonFiniteScore(s.to_string())),
            })
            .collect()
    }
}

/// Parses a score response, reading the non-standard `NaN`/`Infinity`
/// literals some JSON encoders emit as missing scores.
fn parse_scores(text: &str) -> Result<ScoreResponse, serde_json::Error> {
    match serde_json::from_str(text) {
        Ok(r) => Ok(r),
        Err(first) => {
            let patched = text
                .replace("-Infinity", "null")
                .replace("Infinity", "null")
                .replace("NaN", "null");
            serde_json::from_str(&patched).map_err(|_| first)
        }
    }
}

impl Landscape for ExternalOracle {
    fn name(&self) -> &str {
        &self.name
    }

    fn arity(&self) -> Arity {
        Arity::Full(self.length)
    }

    fn evaluate(&self, seq: &Sequence) -> Result<ObjectiveVector, LandscapeError> {
        Ok(self.external_evaluate(std::slice::from_ref(seq))?.remove(0))
    }

    /// One request for the whole batch.
    fn evaluate_batch(
        &self,
        seqs: &[Sequence],
        _exec: &Executor,
    ) -> Result<Vec<ObjectiveVector>, LandscapeError> {
        if seqs.is_empty() {
            return Ok(Vec::new());
        }
        self.external_evaluate(seqs)
    }
}
