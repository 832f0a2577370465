//! Blocking JSON-over-HTTP with exponential backoff, shared by the external
//! oracle client and the live chat-completion transport.

use std::time::Duration;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("request to {url} failed after {attempts} attempt(s): {last}")]
    Exhausted {
        url: String,
        attempts: u32,
        last: String,
    },
    #[error("request to {url} returned status {status}: {body}")]
    Status { url: String, status: u16, body: String },
    #[error("invalid response body from {url}: {message}")]
    Decode { url: String, message: String },
}

/// Retry schedule: attempt `n` (0-based) that fails waits
/// `min(base_delay * 2^n, max_delay)` before the next one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    pub timeout_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
            timeout_ms: 60_000,
        }
    }
}

impl RetryPolicy {
    pub fn delay_after(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }

    /// Total sleep across a fully exhausted schedule.
    pub fn total_backoff(&self) -> Duration {
        (0..self.max_retries).map(|a| self.delay_after(a)).sum()
    }
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    policy: RetryPolicy,
}

impl JsonClient {
    pub fn new(policy: RetryPolicy) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(policy.timeout_ms)))
            .build()
            .into();
        Self { agent, policy }
    }

    /// POSTs `body`, retrying transport failures and statuses for which
    /// `retryable` returns true. Other non-2xx statuses fail immediately.
    pub fn post<B: Serialize, T: DeserializeOwned>(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &B,
        retryable: impl Fn(u16) -> bool,
    ) -> Result<T, HttpError> {
        let text = self.post_text(url, bearer, body, retryable)?;
        serde_json::from_str(&text).map_err(|e| HttpError::Decode {
            url: url.to_string(),
            message: e.to_string(),
        })
    }

    /// Like [`JsonClient::post`] but hands back the raw success body.
    pub fn post_text<B: Serialize>(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &B,
        retryable: impl Fn(u16) -> bool,
    ) -> Result<String, HttpError> {
        let mut last = String::new();
        let attempts = self.policy.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.policy.delay_after(attempt - 1));
            }
            let mut req = self.agent.post(url).header("Content-Type", "application/json");
            if let Some(key) = bearer {
                req = req.header("Authorization", format!("Bearer {key}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        return resp.body_mut().read_to_string().map_err(|e| HttpError::Decode {
                            url: url.to_string(),
                            message: e.to_string(),
                        });
                    }
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    if !retryable(status) {
                        return Err(HttpError::Status {
                            url: url.to_string(),
                            status,
                            body: text,
                        });
                    }
                    log::warn!("{url}: status {status} on attempt {}", attempt + 1);
                    last = format!("status {status}");
                }
                Err(e) => {
                    log::warn!("{url}: {e} on attempt {}", attempt + 1);
                    last = e.to_string();
                }
            }
        }
        Err(HttpError::Exhausted {
            url: url.to_string(),
            attempts,
            last,
        })
    }
}
