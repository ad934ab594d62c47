use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{prompt_sha256, LlmBackend, LlmError, LlmRequest, LlmResponse};

/// One JSON line of a transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptRecord {
    pub subtask: String,
    pub prompt_sha256: String,
    pub prompt: String,
    pub response: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

impl TranscriptRecord {
    pub fn new(request: &LlmRequest, response: &LlmResponse) -> Self {
        Self {
            subtask: request.subtask.as_str().to_string(),
            prompt_sha256: prompt_sha256(&request.prompt),
            prompt: request.prompt.clone(),
            response: response.text.clone(),
            prompt_tokens: response.prompt_tokens,
            completion_tokens: response.completion_tokens,
            latency_ms: response.latency_ms,
        }
    }
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptRecord>, LlmError> {
    let text = fs::read_to_string(path).map_err(|source| LlmError::Transcript {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LlmError::TranscriptFormat {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Serves recorded responses. Lookup is by prompt hash; unless strict, a
/// miss falls back to the next unconsumed record of the same subtask. Every
/// record is served at most once.
#[derive(Debug)]
pub struct ReplayBackend {
    records: Mutex<Vec<(TranscriptRecord, bool)>>,
    strict: bool,
}

impl ReplayBackend {
    pub fn new(records: Vec<TranscriptRecord>, strict: bool) -> Self {
        Self {
            records: Mutex::new(records.into_iter().map(|r| (r, false)).collect()),
            strict,
        }
    }

    pub fn from_path(path: &Path, strict: bool) -> Result<Self, LlmError> {
        Ok(Self::new(read_transcript(path)?, strict))
    }

    /// Records not yet served.
    pub fn remaining(&self) -> usize {
        self.records.lock().expect("replay lock").iter().filter(|(_, used)| !used).count()
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let hash = prompt_sha256(&request.prompt);
        let subtask = request.subtask.as_str();
        let mut records = self.records.lock().expect("replay lock");
        let exact = records
            .iter()
            .position(|(r, used)| !used && r.prompt_sha256 == hash && r.subtask == subtask);
        let found = exact.or_else(|| {
            if self.strict {
                None
            } else {
                records.iter().position(|(r, used)| !used && r.subtask == subtask)
            }
        });
        let Some(i) = found else {
            return Err(LlmError::NoMatchingRecord {
                subtask: subtask.to_string(),
                prompt_sha256: hash,
            });
        };
        if exact.is_none() {
            log::debug!("replay: hash miss for {subtask}, using next record of that subtask");
        }
        let (r, used) = &mut records[i];
        *used = true;
        Ok(LlmResponse {
            text: r.response.clone(),
            prompt_tokens: r.prompt_tokens,
            completion_tokens: r.completion_tokens,
            latency_ms: r.latency_ms,
        })
    }
}

/// Wraps a backend and appends every completed call to a JSONL file before
/// returning it. The file is created (empty) on construction.
#[derive(Debug)]
pub struct RecordingBackend<B> {
    inner: B,
    path: PathBuf,
    sink: Mutex<File>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn create(inner: B, path: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let path = path.into();
        let file = File::create(&path).map_err(|source| LlmError::Transcript {
            path: path.clone(),
            source,
        })?;
        Ok(Self {
            inner,
            path,
            sink: Mutex::new(file),
        })
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let response = self.inner.complete(request)?;
        let mut line = serde_json::to_string(&TranscriptRecord::new(request, &response))
            .expect("record serializes");
        line.push('\n');
        let mut sink = self.sink.lock().expect("sink lock");
        sink.write_all(line.as_bytes())
            .and_then(|_| sink.flush())
            .map_err(|source| LlmError::Transcript {
                path: self.path.clone(),
                source,
            })?;
        Ok(response)
    }
}
