//! LLM access: prompt library, backends (live, replay, recording, scripted)
//! and a per-run gateway that logs calls and accounts for cost.

mod gateway;
mod live;
pub mod prompts;
mod scripted;
mod transcript;

use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use gateway::{CallRecord, Gateway, Phase};
pub use live::{LiveBackend, LiveConfig, ENV_API_KEY, ENV_BASE_URL};
pub use prompts::{builtin, PromptError, PromptTemplate, TemplateId, Vars};
pub use scripted::{estimate_tokens, Script, ScriptedBackend};
pub use transcript::{read_transcript, RecordingBackend, ReplayBackend, TranscriptRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub subtask: TemplateId,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("malformed completion response: {0}")]
    Protocol(String),
    #[error("no transcript record for subtask {subtask} (prompt sha256 {prompt_sha256})")]
    NoMatchingRecord {
        subtask: String,
        prompt_sha256: String,
    },
    #[error("scripted responses exhausted for subtask {0}")]
    ScriptExhausted(String),
    #[error("transcript {path}: {source}")]
    Transcript {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("transcript {path}, line {line}: {message}")]
    TranscriptFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("backend configuration: {0}")]
    Config(String),
}

/// Anything that turns a prompt into a completion.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<B> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Per-1k-token prices for one model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prices {
    pub prompt_price_per_1k: f64,
    pub completion_price_per_1k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn add(&mut self, other: &Usage) {
        self.calls += other.calls;
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
    }

    /// Cost from integer token totals, so it does not depend on call order.
    pub fn cost(&self, prices: &Prices) -> f64 {
        (self.prompt_tokens as f64 * prices.prompt_price_per_1k
            + self.completion_tokens as f64 * prices.completion_price_per_1k)
            / 1000.0
    }
}
