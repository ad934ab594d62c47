use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::prompts::{builtin, PromptTemplate, TemplateId, Vars, REASK_SUFFIX};
use super::{prompt_sha256, LlmBackend, LlmError, LlmRequest, LlmResponse, Usage};

/// Pipeline phase a call is attributed to: question parsing, URI linking,
/// query construction, answer generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "QP")]
    Qp,
    #[serde(rename = "UL")]
    Ul,
    #[serde(rename = "QC")]
    Qc,
    #[serde(rename = "AG")]
    Ag,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Qp, Phase::Ul, Phase::Qc, Phase::Ag];
}

/// One LLM call as seen by the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub seq: usize,
    pub subtask: TemplateId,
    pub phase: Phase,
    pub attempt: usize,
    pub reask: bool,
    pub prompt_sha256: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

#[derive(Debug)]
struct State {
    phase: Phase,
    attempt: usize,
    calls: Vec<CallRecord>,
}

/// Per-question view of a backend: renders prompts, tags calls with the
/// current phase and attempt, and keeps the call log.
pub struct Gateway {
    backend: Arc<dyn LlmBackend>,
    model: String,
    max_tokens: u32,
    prompts: BTreeMap<TemplateId, PromptTemplate>,
    state: Mutex<State>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn LlmBackend>, model: impl Into<String>, max_tokens: u32) -> Self {
        Self {
            backend,
            model: model.into(),
            max_tokens,
            prompts: TemplateId::ALL.into_iter().map(|id| (id, builtin(id))).collect(),
            state: Mutex::new(State {
                phase: Phase::Qp,
                attempt: 0,
                calls: Vec::new(),
            }),
        }
    }

    pub fn set_context(&self, phase: Phase, attempt: usize) {
        let mut s = self.state.lock().expect("gateway lock");
        s.phase = phase;
        s.attempt = attempt;
    }

    pub fn prompt(&self, id: TemplateId) -> &PromptTemplate {
        &self.prompts[&id]
    }

    pub fn render(&self, id: TemplateId, vars: &Vars, n_shots: usize) -> Result<String, LlmError> {
        Ok(self.prompt(id).render(vars, n_shots)?)
    }

    pub fn complete(
        &self,
        subtask: TemplateId,
        prompt: &str,
        temperature: f64,
    ) -> Result<LlmResponse, LlmError> {
        self.call(subtask, prompt, temperature, false)
    }

    /// Repeats a call with the corrective suffix appended.
    pub fn reask(
        &self,
        subtask: TemplateId,
        prompt: &str,
        temperature: f64,
    ) -> Result<LlmResponse, LlmError> {
        self.call(subtask, &format!("{prompt}{REASK_SUFFIX}"), temperature, true)
    }

    fn call(
        &self,
        subtask: TemplateId,
        prompt: &str,
        temperature: f64,
        reask: bool,
    ) -> Result<LlmResponse, LlmError> {
        let request = LlmRequest {
            subtask,
            prompt: prompt.to_string(),
            temperature,
            max_tokens: self.max_tokens,
            model: self.model.clone(),
        };
        let response = self.backend.complete(&request)?;
        let mut s = self.state.lock().expect("gateway lock");
        let record = CallRecord {
            seq: s.calls.len(),
            subtask,
            phase: s.phase,
            attempt: s.attempt,
            reask,
            prompt_sha256: prompt_sha256(prompt),
            prompt_tokens: response.prompt_tokens,
            completion_tokens: response.completion_tokens,
            latency_ms: response.latency_ms,
        };
        s.calls.push(record);
        Ok(response)
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.state.lock().expect("gateway lock").calls.clone()
    }

    pub fn usage(&self) -> Usage {
        let s = self.state.lock().expect("gateway lock");
        let mut u = Usage::default();
        for c in &s.calls {
            u.calls += 1;
            u.prompt_tokens += c.prompt_tokens;
            u.completion_tokens += c.completion_tokens;
        }
        u
    }
}
