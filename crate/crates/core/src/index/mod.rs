//! Label index over the knowledge base, scored with BM25 plus an
//! exact-label bonus.

mod normalize;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::kb::KbStore;

pub use normalize::{normalize, tokenize};

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

const SNAPSHOT_FORMAT: &str = "triad-mention-index/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Entity,
    Relation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    TextFilter,
    Traversal,
    LlmSelected,
}

/// A ranked KB URI offered for a mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UriCandidate {
    pub uri: String,
    pub label: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
    pub source: CandidateSource,
}

/// Reassigns consecutive 1-based ranks in list order.
pub fn rerank(list: &mut [UriCandidate]) {
    for (i, c) in list.iter_mut().enumerate() {
        c.rank = i + 1;
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("cannot access snapshot {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("invalid snapshot {path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Doc {
    uri: String,
    label: String,
    normalized: String,
    len: usize,
    tf: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Corpus {
    docs: Vec<Doc>,
    postings: BTreeMap<String, Vec<usize>>,
    avgdl: f64,
}

impl Corpus {
    fn build(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut docs = Vec::new();
        let mut postings: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (uri, label) in entries {
            let tokens = tokenize(&label);
            if tokens.is_empty() {
                continue;
            }
            let id = docs.len();
            let mut tf = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_insert(0) += 1;
            }
            for t in tf.keys() {
                postings.entry(t.clone()).or_default().push(id);
            }
            docs.push(Doc {
                uri,
                label,
                normalized: tokens.join(" "),
                len: tokens.len(),
                tf,
            });
        }
        let total: usize = docs.iter().map(|d| d.len).sum();
        let avgdl = if docs.is_empty() {
            0.0
        } else {
            total as f64 / docs.len() as f64
        };
        Self {
            docs,
            postings,
            avgdl,
        }
    }

    fn idf(&self, token: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.postings.get(token).map_or(0, Vec::len) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn bm25(&self, query: &[String], doc: &Doc) -> f64 {
        query
            .iter()
            .map(|t| {
                let tf = f64::from(doc.tf.get(t).copied().unwrap_or(0));
                if tf == 0.0 {
                    return 0.0;
                }
                let norm = 1.0 - B + B * doc.len as f64 / self.avgdl;
                self.idf(t) * tf * (K1 + 1.0) / (tf + K1 * norm)
            })
            .sum()
    }

    /// Upper bound on any BM25 score for `query`, plus one.
    fn exact_bonus(&self, query: &[String]) -> f64 {
        query.iter().map(|t| self.idf(t) * (K1 + 1.0)).sum::<f64>() + 1.0
    }

    fn score(&self, query: &[String], normalized: &str, doc: &Doc) -> f64 {
        let s = self.bm25(query, doc);
        if doc.normalized == normalized {
            s + self.exact_bonus(query)
        } else {
            s
        }
    }
}

/// Best (score, label) per URI, ranked by score then URI.
fn rank(best: HashMap<&str, (f64, &str)>, limit: usize) -> Vec<UriCandidate> {
    let mut v: Vec<(&str, f64, &str)> = best.into_iter().map(|(u, (s, l))| (u, s, l)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v.truncate(limit);
    v.into_iter()
        .enumerate()
        .map(|(i, (uri, score, label))| UriCandidate {
            uri: uri.to_string(),
            label: label.to_string(),
            score,
            rank: i + 1,
            source: CandidateSource::TextFilter,
        })
        .collect()
}

fn keep_best<'a>(best: &mut HashMap<&'a str, (f64, &'a str)>, doc: &'a Doc, score: f64) {
    let e = best.entry(&doc.uri).or_insert((score, &doc.label));
    if score > e.0 || (score == e.0 && doc.label.as_str() < e.1) {
        *e = (score, &doc.label);
    }
}

/// Label index with one sub-corpus per kind. Relations are URIs seen in
/// predicate position; entities are URIs seen as subject or object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MentionIndex {
    format: String,
    kb_fingerprint: String,
    entity: Corpus,
    relation: Corpus,
}

impl MentionIndex {
    pub fn build(store: &KbStore) -> Self {
        let nodes = store.node_iris();
        let mut entities = Vec::new();
        let mut relations = Vec::new();
        for (uri, labels) in store.label_map() {
            for label in labels {
                if nodes.contains(uri.as_str()) {
                    entities.push((uri.clone(), label.clone()));
                }
                if store.is_predicate(uri) {
                    relations.push((uri.clone(), label.clone()));
                }
            }
        }
        Self {
            format: SNAPSHOT_FORMAT.to_string(),
            kb_fingerprint: fingerprint(store),
            entity: Corpus::build(entities),
            relation: Corpus::build(relations),
        }
    }

    fn corpus(&self, kind: Kind) -> &Corpus {
        match kind {
            Kind::Entity => &self.entity,
            Kind::Relation => &self.relation,
        }
    }

    /// Number of indexed (URI, label) documents of `kind`.
    pub fn doc_count(&self, kind: Kind) -> usize {
        self.corpus(kind).docs.len()
    }

    /// Number of distinct URIs of `kind`.
    pub fn uri_count(&self, kind: Kind) -> usize {
        let mut uris: Vec<&str> = self.corpus(kind).docs.iter().map(|d| d.uri.as_str()).collect();
        uris.dedup();
        uris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entity.docs.is_empty() && self.relation.docs.is_empty()
    }

    /// Top `limit` URIs of `kind` for `mention`. Variables (leading '?') and
    /// mentions without tokens match nothing.
    pub fn search(&self, mention: &str, kind: Kind, limit: usize) -> Vec<UriCandidate> {
        if mention.trim_start().starts_with('?') || limit == 0 {
            return Vec::new();
        }
        let query = tokenize(mention);
        if query.is_empty() {
            return Vec::new();
        }
        let normalized = query.join(" ");
        let corpus = self.corpus(kind);
        let mut hits: Vec<usize> = query
            .iter()
            .filter_map(|t| corpus.postings.get(t))
            .flatten()
            .copied()
            .collect();
        hits.sort_unstable();
        hits.dedup();
        let mut best = HashMap::new();
        for id in hits {
            let doc = &corpus.docs[id];
            keep_best(&mut best, doc, corpus.score(&query, &normalized, doc));
        }
        rank(best, limit)
    }

    /// Scores exactly the given URIs against `mention` (zero when no label
    /// shares a token), ranked like [`search`](Self::search). URIs without
    /// labels of `kind` are scored zero with their local name as label.
    pub fn score_uris<'a>(
        &self,
        mention: &str,
        kind: Kind,
        uris: impl IntoIterator<Item = &'a str>,
    ) -> Vec<UriCandidate> {
        let query = tokenize(mention.trim_start_matches('?'));
        let normalized = query.join(" ");
        let corpus = self.corpus(kind);
        let wanted: Vec<&str> = uris.into_iter().collect();
        let mut best: HashMap<&str, (f64, &str)> = HashMap::new();
        for doc in &corpus.docs {
            if wanted.contains(&doc.uri.as_str()) {
                let s = if query.is_empty() {
                    0.0
                } else {
                    corpus.score(&query, &normalized, doc)
                };
                keep_best(&mut best, doc, s);
            }
        }
        let fallback: Vec<(String, &str)> = wanted
            .iter()
            .filter(|u| !best.contains_key(*u))
            .map(|u| (crate::kb::local_name(u), *u))
            .collect();
        for (label, uri) in &fallback {
            best.insert(uri, (0.0, label.as_str()));
        }
        rank(best, usize::MAX)
    }

    pub fn matches_store(&self, store: &KbStore) -> bool {
        self.kb_fingerprint == fingerprint(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("index serializes");
        fs::write(path, json).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let index: MentionIndex = serde_json::from_str(&text).map_err(|e| IndexError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if index.format != SNAPSHOT_FORMAT {
            return Err(IndexError::Format {
                path: path.display().to_string(),
                message: format!("unknown format tag {:?}", index.format),
            });
        }
        Ok(index)
    }

    /// Loads the snapshot if it exists and was built from `store`, otherwise
    /// builds a fresh index.
    pub fn load_or_build(path: Option<&Path>, store: &KbStore) -> Self {
        if let Some(p) = path {
            match Self::load(p) {
                Ok(idx) if idx.matches_store(store) => return idx,
                Ok(_) => log::warn!("snapshot {} is stale; rebuilding", p.display()),
                Err(e) => log::debug!("{e}; building index"),
            }
        }
        Self::build(store)
    }
}

fn fingerprint(store: &KbStore) -> String {
    let mut h = Sha256::new();
    for t in store.triples() {
        h.update(t.to_string().as_bytes());
        h.update(b"\n");
    }
    for (uri, labels) in store.label_map() {
        for l in labels {
            h.update(uri.as_bytes());
            h.update(b"\t");
            h.update(l.as_bytes());
            h.update(b"\n");
        }
    }
    hex::encode(h.finalize())
}
