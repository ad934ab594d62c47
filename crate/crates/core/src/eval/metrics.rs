use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::kb::KbStore;
use crate::roles::{Answer, AnswerValue};

use super::benchmark::{BenchmarkItem, Gold};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    pub const PERFECT: Scores = Scores {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };
    pub const ZERO: Scores = Scores {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }
}

/// Match counts behind one item's scores, kept for micro averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub predicted: usize,
    pub predicted_correct: usize,
    pub gold: usize,
    pub gold_found: usize,
}

impl Counts {
    pub fn scores(&self) -> Scores {
        match (self.predicted, self.gold) {
            (0, 0) => Scores::PERFECT,
            (0, _) | (_, 0) => Scores::ZERO,
            (p, g) => Scores::from_pr(self.predicted_correct as f64 / p as f64, self.gold_found as f64 / g as f64),
        }
    }

    pub fn add(&mut self, o: &Counts) {
        self.predicted += o.predicted;
        self.predicted_correct += o.predicted_correct;
        self.gold += o.gold;
        self.gold_found += o.gold_found;
    }
}

/// Canonical comparison form: URIs verbatim, numbers by value, other
/// literals trimmed, whitespace-collapsed and lowercased.
pub fn normalize_answer(s: &str) -> String {
    let s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    if s.contains("://") {
        return s;
    }
    if let Ok(x) = s.parse::<f64>() {
        if x.is_finite() {
            return canonical_number(x);
        }
    }
    s.to_lowercase()
}

fn canonical_number(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Answer matcher that lets a literal stand for a URI carrying it as a label.
#[derive(Debug, Clone, Default)]
pub struct Matcher {
    labels: BTreeMap<String, BTreeSet<String>>,
}

impl Matcher {
    pub fn new(store: &KbStore) -> Self {
        let labels = store
            .label_map()
            .iter()
            .map(|(uri, ls)| (uri.clone(), ls.iter().map(|l| normalize_answer(l)).collect()))
            .collect();
        Self { labels }
    }

    fn is_uri(s: &str) -> bool {
        s.contains("://")
    }

    /// Symmetric match on normalized forms.
    pub fn matches(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        let label_of = |uri: &str, lit: &str| self.labels.get(uri).is_some_and(|ls| ls.contains(lit));
        match (Self::is_uri(a), Self::is_uri(b)) {
            (true, false) => label_of(a, b),
            (false, true) => label_of(b, a),
            _ => false,
        }
    }

    pub fn counts(&self, predicted: &Answer, gold: &Gold) -> Counts {
        let pred: Vec<String> = match &predicted.value {
            AnswerValue::Empty => Vec::new(),
            AnswerValue::Boolean(b) => vec![b.to_string()],
            AnswerValue::Count(n) => vec![n.to_string()],
            AnswerValue::Values(vs) => {
                let set: BTreeSet<String> = vs.iter().map(|v| normalize_answer(v)).collect();
                set.into_iter().collect()
            }
        };
        let gold: Vec<String> = match gold {
            Gold::Boolean(b) => vec![b.to_string()],
            Gold::Count(n) => vec![n.to_string()],
            Gold::Values(vs) => {
                let set: BTreeSet<String> = vs.iter().map(|v| normalize_answer(v)).collect();
                set.into_iter().collect()
            }
        };
        Counts {
            predicted: pred.len(),
            predicted_correct: pred.iter().filter(|p| gold.iter().any(|g| self.matches(p, g))).count(),
            gold: gold.len(),
            gold_found: gold.iter().filter(|g| pred.iter().any(|p| self.matches(p, g))).count(),
        }
    }

    /// Boolean and count answers are all-or-nothing; sets get set P/R/F1.
    pub fn score(&self, predicted: &Answer, item: &BenchmarkItem) -> Scores {
        let c = self.counts(predicted, &item.gold_answers);
        match item.gold_answers {
            Gold::Boolean(_) | Gold::Count(_) => {
                if c.predicted == 1 && c.predicted_correct == 1 {
                    Scores::PERFECT
                } else {
                    Scores::ZERO
                }
            }
            Gold::Values(_) => c.scores(),
        }
    }
}

/// Share of gold URIs found in `found`; `None` without gold URIs.
pub fn linking_recall(gold: Option<&BTreeSet<String>>, found: &BTreeSet<String>) -> Option<f64> {
    let gold = gold.filter(|g| !g.is_empty())?;
    Some(gold.iter().filter(|u| found.contains(*u)).count() as f64 / gold.len() as f64)
}
