use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::llm::{
    read_transcript, Gateway, LiveBackend, LiveConfig, LlmBackend, LlmError, RecordingBackend, ReplayBackend,
    TranscriptRecord,
};

use super::config::{BackendConfig, BackendKind};

enum Origin {
    ReplayFile { records: Vec<TranscriptRecord>, strict: bool },
    /// One transcript per benchmark item, named `<id>.jsonl`.
    ReplayDir { dir: PathBuf, strict: bool },
    Shared(Arc<dyn LlmBackend>),
}

/// Where recorded transcripts go: a single file, or one file per item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordTarget {
    File(PathBuf),
    Dir(PathBuf),
}

/// Hands out one backend per question, optionally recording its calls.
pub struct BackendSource {
    origin: Origin,
    record: Option<RecordTarget>,
}

impl BackendSource {
    /// A transcript file, or a directory of per-item transcripts.
    pub fn replay(path: &Path, strict: bool) -> Result<Self, LlmError> {
        let origin = if path.is_dir() {
            Origin::ReplayDir {
                dir: path.to_path_buf(),
                strict,
            }
        } else {
            Origin::ReplayFile {
                records: read_transcript(path)?,
                strict,
            }
        };
        Ok(Self { origin, record: None })
    }

    pub fn shared(backend: Arc<dyn LlmBackend>) -> Self {
        Self {
            origin: Origin::Shared(backend),
            record: None,
        }
    }

    pub fn from_config(cfg: &BackendConfig) -> Result<Self, LlmError> {
        match &cfg.kind {
            BackendKind::Replay { transcripts, strict } => {
                let path = transcripts
                    .as_deref()
                    .ok_or_else(|| LlmError::Config("replay backend needs a transcripts path".into()))?;
                Self::replay(path, *strict)
            }
            BackendKind::Live {
                base_url,
                in_flight,
                max_retries,
                timeout,
            } => {
                let live = LiveConfig {
                    in_flight: *in_flight,
                    max_retries: *max_retries,
                    timeout: *timeout,
                    ..LiveConfig::from_env(base_url.as_deref())?
                };
                Ok(Self::shared(Arc::new(LiveBackend::new(live))))
            }
        }
    }

    pub fn recording(mut self, target: RecordTarget) -> Self {
        self.record = Some(target);
        self
    }

    pub fn backend(&self, id: &str) -> Result<Arc<dyn LlmBackend>, LlmError> {
        let inner: Arc<dyn LlmBackend> = match &self.origin {
            Origin::ReplayFile { records, strict } => Arc::new(ReplayBackend::new(records.clone(), *strict)),
            Origin::ReplayDir { dir, strict } => {
                Arc::new(ReplayBackend::from_path(&dir.join(format!("{id}.jsonl")), *strict)?)
            }
            Origin::Shared(b) => b.clone(),
        };
        let path = match &self.record {
            None => return Ok(inner),
            Some(RecordTarget::File(p)) => p.clone(),
            Some(RecordTarget::Dir(d)) => {
                std::fs::create_dir_all(d).map_err(|source| LlmError::Transcript {
                    path: d.clone(),
                    source,
                })?;
                d.join(format!("{id}.jsonl"))
            }
        };
        Ok(Arc::new(RecordingBackend::create(inner, path)?))
    }

    pub fn gateway(&self, id: &str, cfg: &BackendConfig) -> Result<Gateway, LlmError> {
        Ok(Gateway::new(self.backend(id)?, cfg.model.clone(), cfg.max_tokens))
    }
}
