//! The three agent roles. The generalist parses the question, the
//! decision-maker picks URIs and the final query from offered options, and
//! the advisor produces the typed answer.

mod advisor;
mod decision;
mod generalist;
pub mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::index::{MentionIndex, UriCandidate};
use crate::kb::{ExecError, KbStore};
use crate::llm::{Gateway, LlmError};
use crate::sparql::SlotKey;

pub use advisor::{answer, fallback_answer};
pub use decision::{select_entities, select_query, select_relations, QuerySelection, Verdict, VerdictKind};
pub use generalist::{classify_answer_type, extract_triplets, generate_template};

/// A mention field: named text or an implicit `?variable`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mention {
    Explicit(String),
    Variable(String),
}

impl Mention {
    pub fn parse(field: &str) -> Self {
        let field = field.trim();
        match field.strip_prefix('?') {
            Some(name) => Mention::Variable(name.trim().to_string()),
            None => Mention::Explicit(field.to_string()),
        }
    }

    pub fn explicit(&self) -> Option<&str> {
        match self {
            Mention::Explicit(t) => Some(t),
            Mention::Variable(_) => None,
        }
    }
}

impl fmt::Display for Mention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mention::Explicit(t) => f.write_str(t),
            Mention::Variable(v) => write!(f, "?{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripleMention {
    pub subject: Mention,
    pub relation: Mention,
    pub object: Mention,
}

impl fmt::Display for TripleMention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.subject, self.relation, self.object)
    }
}

/// Distinct explicit subject/object texts in mention order.
pub fn entity_mentions(mentions: &[TripleMention]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for m in mentions {
        for e in [&m.subject, &m.object] {
            if let Some(t) = e.explicit() {
                if !out.iter().any(|x| x == t) {
                    out.push(t.to_string());
                }
            }
        }
    }
    out
}

/// Distinct explicit relation texts in mention order.
pub fn relation_mentions(mentions: &[TripleMention]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for m in mentions {
        if let Some(t) = m.relation.explicit() {
            if !out.iter().any(|x| x == t) {
                out.push(t.to_string());
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Count,
    Select,
    Boolean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Kb,
    LlmFallback,
    Abstain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerValue {
    Values(BTreeSet<String>),
    Boolean(bool),
    Count(u64),
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub kind: AnswerType,
    pub value: AnswerValue,
    pub provenance: Provenance,
}

impl Answer {
    pub fn abstain(kind: AnswerType) -> Self {
        Self {
            kind,
            value: AnswerValue::Empty,
            provenance: Provenance::Abstain,
        }
    }

    pub fn is_abstain(&self) -> bool {
        self.provenance == Provenance::Abstain
    }
}

impl fmt::Display for Answer {
    /// `true`/`false`, a count, one value per line, or `abstain`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            AnswerValue::Empty => f.write_str("abstain"),
            AnswerValue::Boolean(b) => write!(f, "{b}"),
            AnswerValue::Count(n) => write!(f, "{n}"),
            AnswerValue::Values(vs) => {
                let lines: Vec<&str> = vs.iter().map(String::as_str).collect();
                f.write_str(&lines.join("\n"))
            }
        }
    }
}

/// Hyperparameters and policy switches shared by all roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleConfig {
    pub n_shots: usize,
    pub k_entity: usize,
    pub k_relation: usize,
    pub retries: usize,
    pub filter_pool: usize,
    pub enumeration_cap: usize,
    pub relation_pool_cap: usize,
    pub retry_temperature: f64,
    /// Rank predicates linking both explicit endpoints first.
    pub connect_boost: bool,
    pub reextract_final: bool,
    pub regenerate_final: bool,
    pub fallback_boolean: bool,
    pub fallback_fact: bool,
}

impl Default for RoleConfig {
    fn default() -> Self {
        Self {
            n_shots: 3,
            k_entity: 2,
            k_relation: 2,
            retries: 3,
            filter_pool: 10,
            enumeration_cap: 50,
            relation_pool_cap: 30,
            retry_temperature: 0.7,
            connect_boost: true,
            reextract_final: true,
            regenerate_final: true,
            fallback_boolean: true,
            fallback_fact: true,
        }
    }
}

/// Offered pool and selection for one mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linking {
    pub mention: String,
    pub pool: Vec<UriCandidate>,
    pub selected: Vec<UriCandidate>,
}

pub type Links = BTreeMap<String, Linking>;

/// What every role needs besides its own inputs.
pub struct RoleContext<'a> {
    pub gateway: &'a Gateway,
    pub store: &'a KbStore,
    pub index: &'a MentionIndex,
    pub cfg: &'a RoleConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum RoleError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("no triple could be parsed from: {0:?}")]
    ExtractionFailed(String),
    #[error("template rejected: {0}")]
    TemplateFailed(String),
    #[error("no entity candidates for mention {0:?}")]
    StarvedMention(String),
    #[error("no relation candidates for mention {0:?}")]
    StarvedRelation(String),
    #[error("no candidates for slot {0}")]
    StarvedSlot(SlotKey),
    #[error("no candidate query returned results ({0} tried)")]
    NoFeasibleQuery(usize),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("ASK query cannot answer a {0:?} question")]
    TypeMismatch(AnswerType),
}

impl RoleError {
    /// Errors that no retry can fix.
    pub fn is_infrastructure(&self) -> bool {
        matches!(self, RoleError::Llm(_))
    }
}
