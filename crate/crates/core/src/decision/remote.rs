use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use super::{BackendError, ConversationContext, DecisionBackend, DecisionContext};
use crate::world::RemoteSettings;

pub const ENV_ENDPOINT: &str = "TOWNSIM_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "TOWNSIM_LLM_API_KEY";
pub const ENV_MODEL: &str = "TOWNSIM_LLM_MODEL";
pub const ENV_TEMPERATURE: &str = "TOWNSIM_LLM_TEMPERATURE";
pub const ENV_TIMEOUT: &str = "TOWNSIM_LLM_TIMEOUT_SECS";
pub const ENV_MAX_IN_FLIGHT: &str = "TOWNSIM_LLM_MAX_IN_FLIGHT";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RemoteConfigError {
    #[error("remote backend needs an endpoint: set {ENV_ENDPOINT}")]
    MissingEndpoint,
    #[error("{var}: cannot parse `{value}`")]
    BadValue { var: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Full URL of the chat-completion endpoint.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub max_in_flight: usize,
    /// Consecutive failed requests after which the backend reports itself
    /// unavailable.
    pub max_consecutive_failures: u32,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            api_key: None,
            model: "default".to_string(),
            temperature: 0.7,
            timeout: Duration::from_secs(30),
            max_in_flight: 4,
            max_consecutive_failures: 5,
        }
    }

    /// Scenario settings overlaid with `TOWNSIM_LLM_*` environment variables.
    pub fn from_env(settings: &RemoteSettings) -> Result<Self, RemoteConfigError> {
        Self::from_lookup(settings, |k| std::env::var(k).ok())
    }

    pub fn from_lookup(
        settings: &RemoteSettings,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, RemoteConfigError> {
        let endpoint = env(ENV_ENDPOINT)
            .filter(|s| !s.trim().is_empty())
            .or_else(|| settings.endpoint.clone())
            .ok_or(RemoteConfigError::MissingEndpoint)?;
        let mut cfg = RemoteConfig::new(endpoint);
        cfg.api_key = env(ENV_API_KEY).filter(|s| !s.is_empty());
        if let Some(m) = env(ENV_MODEL).or_else(|| settings.model.clone()) {
            cfg.model = m;
        }
        fn parse<T: std::str::FromStr>(var: &'static str, v: String) -> Result<T, RemoteConfigError> {
            v.trim()
                .parse()
                .map_err(|_| RemoteConfigError::BadValue { var, value: v })
        }
        cfg.temperature = match env(ENV_TEMPERATURE) {
            Some(v) => parse(ENV_TEMPERATURE, v)?,
            None => settings.temperature.unwrap_or(cfg.temperature),
        };
        cfg.timeout = match env(ENV_TIMEOUT) {
            Some(v) => Duration::from_secs(parse(ENV_TIMEOUT, v)?),
            None => settings.timeout_secs.map(Duration::from_secs).unwrap_or(cfg.timeout),
        };
        cfg.max_in_flight = match env(ENV_MAX_IN_FLIGHT) {
            Some(v) => parse(ENV_MAX_IN_FLIGHT, v)?,
            None => settings.max_in_flight.unwrap_or(cfg.max_in_flight),
        };
        cfg.max_in_flight = cfg.max_in_flight.max(1);
        Ok(cfg)
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock();
        while *free == 0 {
            self.cv.wait(&mut free);
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

/// Chat-completion client: POSTs `{model, temperature, messages}` and reads
/// `choices[0].message.content`.
pub struct RemoteBackend {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    gate: Semaphore,
    failures: AtomicU32,
}

const SYSTEM_PROMPT: &str = "You control one resident of a small simulated town. Answer with the requested JSON only.";

impl RemoteBackend {
    pub fn new(cfg: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .build()
            .into();
        RemoteBackend {
            gate: Semaphore {
                free: Mutex::new(cfg.max_in_flight),
                cv: Condvar::new(),
            },
            cfg,
            agent,
            failures: AtomicU32::new(0),
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    fn post_once(&self, prompt: &str) -> Result<String, (bool, String)> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": prompt},
            ],
        });
        let mut req = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| {
            let retryable = match &e {
                ureq::Error::StatusCode(s) => *s == 408 || *s == 429 || *s >= 500,
                _ => true,
            };
            (retryable, e.to_string())
        })?;
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| (true, format!("unreadable completion body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or((true, "completion has no choices".to_string()))
    }

    /// One request plus one network-level retry.
    pub fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let _permit = self.gate.acquire();
        let mut last = String::new();
        for _ in 0..2 {
            match self.post_once(prompt) {
                Ok(text) => {
                    self.failures.store(0, Ordering::SeqCst);
                    return Ok(text);
                }
                Err((false, msg)) => return Err(BackendError::Fatal(msg)),
                Err((true, msg)) => {
                    log::warn!("remote backend request failed: {msg}");
                    last = msg;
                }
            }
        }
        let n = self.failures.fetch_add(1, Ordering::SeqCst) + 1;
        if n >= self.cfg.max_consecutive_failures {
            Err(BackendError::Fatal(format!("{n} consecutive failures, last: {last}")))
        } else {
            Err(BackendError::Transient(last))
        }
    }
}

impl DecisionBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn decide(&self, _ctx: &DecisionContext, prompt: &str) -> Result<String, BackendError> {
        self.complete(prompt)
    }

    fn converse(&self, _ctx: &ConversationContext, prompt: &str) -> Result<String, BackendError> {
        self.complete(prompt)
    }

    fn records_transcripts(&self) -> bool {
        true
    }
}
