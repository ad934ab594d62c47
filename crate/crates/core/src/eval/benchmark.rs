use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::roles::AnswerType;

#[derive(Debug, thiserror::Error)]
pub enum BenchmarkError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("benchmark is not a JSON array: {0}")]
    Shape(String),
    #[error("item {index}: {message}")]
    Item { index: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gold {
    Boolean(bool),
    Count(u64),
    Values(Vec<String>),
}

impl Gold {
    pub fn kind(&self) -> AnswerType {
        match self {
            Gold::Boolean(_) => AnswerType::Boolean,
            Gold::Count(_) => AnswerType::Count,
            Gold::Values(_) => AnswerType::Select,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkItem {
    pub id: String,
    pub question: String,
    #[serde(default, with = "answer_type_label", skip_serializing_if = "Option::is_none")]
    pub answer_type: Option<AnswerType>,
    pub gold_answers: Gold,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_sparql: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_uris: Option<BTreeSet<String>>,
}

/// Benchmark files spell the boolean type "yes or no".
mod answer_type_label {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::roles::AnswerType;

    pub fn serialize<S: Serializer>(t: &Option<AnswerType>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => s.serialize_str(label(*t)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<AnswerType>, D::Error> {
        let Some(text) = Option::<String>::deserialize(d)? else {
            return Ok(None);
        };
        match text.as_str() {
            "select" => Ok(Some(AnswerType::Select)),
            "count" => Ok(Some(AnswerType::Count)),
            "yes or no" => Ok(Some(AnswerType::Boolean)),
            other => Err(serde::de::Error::custom(format!(
                "answer_type must be \"select\", \"count\" or \"yes or no\", got {other:?}"
            ))),
        }
    }

    pub fn label(t: AnswerType) -> &'static str {
        match t {
            AnswerType::Select => "select",
            AnswerType::Count => "count",
            AnswerType::Boolean => "yes or no",
        }
    }
}

pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Vec<BenchmarkItem>, BenchmarkError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| BenchmarkError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_benchmark(&text)
}

/// Validates each item and rejects duplicate ids.
pub fn parse_benchmark(text: &str) -> Result<Vec<BenchmarkItem>, BenchmarkError> {
    let raw: Vec<serde_json::Value> = serde_json::from_str(text).map_err(|e| BenchmarkError::Shape(e.to_string()))?;
    let mut seen = BTreeSet::new();
    let mut items = Vec::with_capacity(raw.len());
    for (index, v) in raw.into_iter().enumerate() {
        let bad = |message: String| BenchmarkError::Item { index, message };
        let item: BenchmarkItem = serde_json::from_value(v).map_err(|e| bad(e.to_string()))?;
        if item.id.is_empty() {
            return Err(bad("empty id".into()));
        }
        if item.id.contains(['/', '\\']) || item.id.starts_with('.') {
            return Err(bad(format!("id {:?} cannot name a transcript file", item.id)));
        }
        if !seen.insert(item.id.clone()) {
            return Err(bad(format!("duplicate id {:?}", item.id)));
        }
        if let Some(t) = item.answer_type {
            let g = item.gold_answers.kind();
            // A select question may legitimately have a single numeric answer.
            let agrees = t == g || (t == AnswerType::Select && g == AnswerType::Count);
            if !agrees {
                return Err(bad(format!(
                    "gold answers are {} but answer_type is {}",
                    answer_type_label::label(g),
                    answer_type_label::label(t)
                )));
            }
        }
        items.push(item);
    }
    Ok(items)
}
