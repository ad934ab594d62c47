use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{LlmBackend, LlmError, LlmRequest, LlmResponse};

pub const ENV_API_KEY: &str = "TRIAD_LLM_API_KEY";
pub const ENV_BASE_URL: &str = "TRIAD_LLM_BASE_URL";

#[derive(Debug, Clone, PartialEq)]
pub struct LiveConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub in_flight: usize,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
}

impl LiveConfig {
    /// Base URL from `base_url` or, if absent, the environment; key from the
    /// environment.
    pub fn from_env(base_url: Option<&str>) -> Result<Self, LlmError> {
        let base_url = match base_url {
            Some(u) => u.to_string(),
            None => std::env::var(ENV_BASE_URL)
                .map_err(|_| LlmError::Config(format!("{ENV_BASE_URL} is not set")))?,
        };
        Ok(Self {
            base_url,
            api_key: std::env::var(ENV_API_KEY).ok(),
            ..Self::default()
        })
    }
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            api_key: None,
            in_flight: 4,
            max_retries: 5,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
            timeout: Duration::from_secs(120),
        }
    }
}

/// Chat-completion client with bounded concurrency and backoff on 429/5xx.
pub struct LiveBackend {
    agent: ureq::Agent,
    config: LiveConfig,
    slots: Mutex<usize>,
    freed: Condvar,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

enum Attempt {
    Done(LlmResponse),
    Retry(Option<Duration>, LlmError),
    Fail(LlmError),
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self {
            agent,
            slots: Mutex::new(config.in_flight.max(1)),
            freed: Condvar::new(),
            config,
        }
    }

    fn url(&self) -> String {
        format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn acquire(&self) {
        let mut n = self.slots.lock().expect("slot lock");
        while *n == 0 {
            n = self.freed.wait(n).expect("slot lock");
        }
        *n -= 1;
    }

    fn release(&self) {
        *self.slots.lock().expect("slot lock") += 1;
        self.freed.notify_one();
    }

    fn attempt(&self, request: &LlmRequest) -> Attempt {
        let body = json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let started = Instant::now();
        let mut req = self.agent.post(&self.url()).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(&body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(None, LlmError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            let wait = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<f64>().ok())
                .map(Duration::from_secs_f64);
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Retry(wait, LlmError::Http { status, body });
        }
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fail(LlmError::Http { status, body });
        }
        let parsed: Completion = match resp.body_mut().read_json() {
            Ok(c) => c,
            Err(e) => return Attempt::Fail(LlmError::Protocol(e.to_string())),
        };
        let Some(choice) = parsed.choices.into_iter().next() else {
            return Attempt::Fail(LlmError::Protocol("no choices in response".into()));
        };
        let usage = parsed.usage.unwrap_or(WireUsage {
            prompt_tokens: 0,
            completion_tokens: 0,
        });
        Attempt::Done(LlmResponse {
            text: choice.message.content.unwrap_or_default(),
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

impl LlmBackend for LiveBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let mut backoff = self.config.initial_backoff;
        let mut tries = 0;
        loop {
            self.acquire();
            let outcome = self.attempt(request);
            self.release();
            tries += 1;
            match outcome {
                Attempt::Done(r) => return Ok(r),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(wait, e) => {
                    if tries > self.config.max_retries {
                        return Err(match e {
                            LlmError::Http { status: 429, .. } => {
                                LlmError::RateLimited { attempts: tries }
                            }
                            other => other,
                        });
                    }
                    let delay = wait.unwrap_or(backoff).min(self.config.max_backoff);
                    log::warn!("LLM call failed ({e}); retrying in {delay:?}");
                    thread::sleep(delay);
                    backoff = (backoff * 2).min(self.config.max_backoff);
                }
            }
        }
    }
}
