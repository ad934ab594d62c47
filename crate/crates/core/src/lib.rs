//! Knowledge-base question answering with three cooperating LLM roles over
//! an embedded triple store.

pub mod eval;
pub mod index;
pub mod kb;
pub mod llm;
pub mod orchestrator;
pub mod roles;
pub mod sparql;

pub use eval::{evaluate, load_benchmark, BenchmarkItem, EvalOptions, EvalReport, Gold, Scores};
pub use index::{MentionIndex, UriCandidate};
pub use kb::{KbStore, LoadOptions, ResultSet, Term, Triple};
pub use llm::{Gateway, LlmBackend, LlmError, Prices, ReplayBackend, ScriptedBackend, TemplateId, Usage};
pub use orchestrator::{BackendSource, Deps, Pipeline, PipelineConfig, PipelineError, PipelineResult};
pub use roles::{Answer, AnswerType, AnswerValue, Provenance, RoleConfig};
pub use sparql::{SparqlQuery, SparqlTemplate};
