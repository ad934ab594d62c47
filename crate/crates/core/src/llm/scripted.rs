use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use super::{LlmBackend, LlmError, LlmRequest, LlmResponse};

/// Responses per subtask id, served in order.
pub type Script = BTreeMap<String, Vec<String>>;

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Offline backend answering from per-subtask queues, with synthetic token
/// counts and latency so usage accounting has something to add up.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queues: Mutex<BTreeMap<String, VecDeque<String>>>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self {
            queues: Mutex::new(script.into_iter().map(|(k, v)| (k, v.into())).collect()),
        }
    }

    /// Responses left per subtask.
    pub fn remaining(&self) -> BTreeMap<String, usize> {
        self.queues
            .lock()
            .expect("script lock")
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(k, q)| (k.clone(), q.len()))
            .collect()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let subtask = request.subtask.as_str();
        let text = self
            .queues
            .lock()
            .expect("script lock")
            .get_mut(subtask)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| LlmError::ScriptExhausted(subtask.to_string()))?;
        let completion_tokens = estimate_tokens(&text);
        Ok(LlmResponse {
            prompt_tokens: estimate_tokens(&request.prompt),
            completion_tokens,
            latency_ms: 200 + 20 * completion_tokens,
            text,
        })
    }
}
