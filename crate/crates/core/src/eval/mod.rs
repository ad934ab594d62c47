//! Benchmark evaluation: runs every item through the pipeline, scores the
//! answers and aggregates precision, recall, F1, cost, latency and linking
//! recall.

mod benchmark;
mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::llm::{Prices, Usage};
use crate::orchestrator::{BackendSource, Deps, PhaseTimes, Pipeline, PipelineConfig, PipelineResult};
use crate::roles::{Links, Provenance, RoleConfig};

pub use benchmark::{load_benchmark, parse_benchmark, BenchmarkError, BenchmarkItem, Gold};
pub use metrics::{linking_recall, normalize_answer, Counts, Matcher, Scores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    #[default]
    Macro,
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub concurrency: usize,
    pub repeat: usize,
    pub averaging: Averaging,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            concurrency: 4,
            repeat: 1,
            averaging: Averaging::Macro,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemReport {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub provenance: Option<Provenance>,
    pub scores: Scores,
    pub counts: Counts,
    pub attempts: usize,
    pub llm_calls: usize,
    pub usage: Usage,
    pub cost: f64,
    pub llm_latency_ms: PhaseTimes,
    pub wall_ms: PhaseTimes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_after_filter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_after_selection: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub items: usize,
    pub averaging: Averaging,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub errors: usize,
    pub abstentions: usize,
    pub usage: Usage,
    pub cost: f64,
    /// Mean per item.
    pub llm_latency_ms: PhaseTimes,
    /// Mean per item.
    pub wall_ms: PhaseTimes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_after_filter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_after_selection: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub summary: Summary,
    pub items: Vec<ItemReport>,
    /// Full per-item traces, in item order; `None` for failed items.
    #[serde(skip)]
    pub traces: Vec<Option<PipelineResult>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub model: String,
    pub prices: Prices,
    pub budget_secs: f64,
    pub roles: RoleConfig,
    pub options: EvalOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ConfigSnapshot,
    pub runs: Vec<RunReport>,
    /// Mean of the per-run summaries.
    pub mean: Summary,
}

impl EvalReport {
    /// Copy with wall-clock fields zeroed, for byte comparison across runs.
    pub fn without_wall_clock(&self) -> Self {
        let mut r = self.clone();
        r.mean.wall_ms = PhaseTimes::default();
        for run in &mut r.runs {
            run.summary.wall_ms = PhaseTimes::default();
            for item in &mut run.items {
                item.wall_ms = PhaseTimes::default();
            }
            for t in run.traces.iter_mut().flatten() {
                *t = t.without_wall_clock();
            }
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table of the first run plus the mean line.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let Some(run) = self.runs.first() else {
            return out;
        };
        let w = run.items.iter().map(|i| i.id.len()).max().unwrap_or(2).max(2);
        let _ = writeln!(
            out,
            "{:<w$}  {:>5}  {:>5}  {:>5}  {:>8}  {:>5}  {:<12}  {:>10}",
            "id", "P", "R", "F1", "attempts", "calls", "provenance", "cost"
        );
        for i in &run.items {
            let prov = match (&i.error, i.provenance) {
                (Some(_), _) => "error",
                (None, Some(Provenance::Kb)) => "kb",
                (None, Some(Provenance::LlmFallback)) => "llm-fallback",
                (None, Some(Provenance::Abstain)) => "abstain",
                (None, None) => "-",
            };
            let _ = writeln!(
                out,
                "{:<w$}  {:>5.3}  {:>5.3}  {:>5.3}  {:>8}  {:>5}  {:<12}  {:>10.6}",
                i.id, i.scores.precision, i.scores.recall, i.scores.f1, i.attempts, i.llm_calls, prov, i.cost
            );
        }
        let m = &self.mean;
        let _ = writeln!(
            out,
            "{:?} over {} items x {} runs: P={:.3} R={:.3} F1={:.3} cost={:.6}",
            m.averaging,
            m.items,
            self.runs.len(),
            m.precision,
            m.recall,
            m.f1,
            m.cost
        );
        out
    }
}

fn pool_uris(links: &Links, selected_only: bool) -> BTreeSet<String> {
    links
        .values()
        .flat_map(|l| if selected_only { &l.selected } else { &l.pool })
        .map(|c| c.uri.clone())
        .collect()
}

fn item_report(item: &BenchmarkItem, matcher: &Matcher, outcome: Result<PipelineResult, String>) -> ItemReport {
    match outcome {
        Ok(r) => {
            let counts = matcher.counts(&r.answer, &item.gold_answers);
            let scores = matcher.score(&r.answer, item);
            let mut filtered = pool_uris(&r.entities, false);
            filtered.extend(pool_uris(&r.relations, false));
            let mut selected = pool_uris(&r.entities, true);
            selected.extend(pool_uris(&r.relations, true));
            ItemReport {
                id: item.id.clone(),
                question: item.question.clone(),
                answer: r.answer.to_string(),
                provenance: Some(r.answer.provenance),
                scores,
                counts,
                attempts: r.attempts.len(),
                llm_calls: r.calls.len(),
                usage: r.usage,
                cost: r.cost,
                llm_latency_ms: r.llm_latency_ms,
                wall_ms: r.wall_ms,
                recall_after_filter: linking_recall(item.gold_uris.as_ref(), &filtered),
                recall_after_selection: linking_recall(item.gold_uris.as_ref(), &selected),
                error: None,
            }
        }
        Err(e) => ItemReport {
            id: item.id.clone(),
            question: item.question.clone(),
            answer: String::new(),
            provenance: None,
            scores: Scores::ZERO,
            counts: Counts {
                gold: match &item.gold_answers {
                    Gold::Values(v) => v.len(),
                    _ => 1,
                },
                ..Counts::default()
            },
            attempts: 0,
            llm_calls: 0,
            usage: Usage::default(),
            cost: 0.0,
            llm_latency_ms: PhaseTimes::default(),
            wall_ms: PhaseTimes::default(),
            recall_after_filter: None,
            recall_after_selection: None,
            error: Some(e),
        },
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(items: &[ItemReport], averaging: Averaging) -> Summary {
    let n = items.len();
    let scores = match averaging {
        Averaging::Macro => Scores {
            precision: mean(items.iter().map(|i| i.scores.precision)).unwrap_or(0.0),
            recall: mean(items.iter().map(|i| i.scores.recall)).unwrap_or(0.0),
            f1: mean(items.iter().map(|i| i.scores.f1)).unwrap_or(0.0),
        },
        Averaging::Micro => {
            let mut c = Counts::default();
            for i in items {
                c.add(&i.counts);
            }
            if n == 0 {
                Scores::ZERO
            } else {
                c.scores()
            }
        }
    };
    let mut usage = Usage::default();
    let mut llm = PhaseTimes::default();
    let mut wall = PhaseTimes::default();
    for i in items {
        usage.add(&i.usage);
        llm.add(&i.llm_latency_ms);
        wall.add(&i.wall_ms);
    }
    if n > 0 {
        for p in crate::llm::Phase::ALL {
            *llm.get_mut(p) /= n as f64;
            *wall.get_mut(p) /= n as f64;
        }
    }
    Summary {
        items: n,
        averaging,
        precision: scores.precision,
        recall: scores.recall,
        f1: scores.f1,
        errors: items.iter().filter(|i| i.error.is_some()).count(),
        abstentions: items.iter().filter(|i| i.provenance == Some(Provenance::Abstain)).count(),
        usage,
        cost: items.iter().map(|i| i.cost).sum(),
        llm_latency_ms: llm,
        wall_ms: wall,
        recall_after_filter: mean(items.iter().filter_map(|i| i.recall_after_filter)),
        recall_after_selection: mean(items.iter().filter_map(|i| i.recall_after_selection)),
    }
}

fn mean_summary(runs: &[RunReport], averaging: Averaging) -> Summary {
    let Some(first) = runs.first() else {
        return Summary {
            averaging,
            ..Summary::default()
        };
    };
    let k = runs.len() as f64;
    let avg = |f: &dyn Fn(&Summary) -> f64| runs.iter().map(|r| f(&r.summary)).sum::<f64>() / k;
    let avg_opt = |f: &dyn Fn(&Summary) -> Option<f64>| mean(runs.iter().filter_map(|r| f(&r.summary)));
    let mut llm = PhaseTimes::default();
    let mut wall = PhaseTimes::default();
    let mut usage = Usage::default();
    for r in runs {
        llm.add(&r.summary.llm_latency_ms);
        wall.add(&r.summary.wall_ms);
        usage.add(&r.summary.usage);
    }
    for p in crate::llm::Phase::ALL {
        *llm.get_mut(p) /= k;
        *wall.get_mut(p) /= k;
    }
    Summary {
        items: first.summary.items,
        averaging,
        precision: avg(&|s| s.precision),
        recall: avg(&|s| s.recall),
        f1: avg(&|s| s.f1),
        errors: runs.iter().map(|r| r.summary.errors).sum(),
        abstentions: runs.iter().map(|r| r.summary.abstentions).sum(),
        usage,
        cost: avg(&|s| s.cost),
        llm_latency_ms: llm,
        wall_ms: wall,
        recall_after_filter: avg_opt(&|s| s.recall_after_filter),
        recall_after_selection: avg_opt(&|s| s.recall_after_selection),
    }
}

/// Runs the benchmark `opts.repeat` times. Items run concurrently; results
/// keep benchmark order. Failures are scored zero with an error note.
pub fn evaluate(
    items: &[BenchmarkItem],
    deps: &Deps,
    cfg: &PipelineConfig,
    source: &BackendSource,
    opts: &EvalOptions,
) -> EvalReport {
    let matcher = Matcher::new(&deps.store);
    let pipeline = Pipeline::from_config(deps, cfg);
    let runs = (0..opts.repeat.max(1))
        .map(|run| {
            let results: Vec<Mutex<Option<Result<PipelineResult, String>>>> =
                items.iter().map(|_| Mutex::new(None)).collect();
            let next = AtomicUsize::new(0);
            let workers = opts.concurrency.clamp(1, items.len().max(1));
            std::thread::scope(|s| {
                for _ in 0..workers {
                    s.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        let outcome = source
                            .gateway(&item.id, &cfg.backend)
                            .map_err(|e| e.to_string())
                            .and_then(|g| pipeline.run(&item.question, &g).map_err(|e| e.to_string()));
                        if let Err(e) = &outcome {
                            log::warn!("item {}: {e}", item.id);
                        }
                        *results[i].lock().expect("result slot") = Some(outcome);
                    });
                }
            });
            let outcomes: Vec<Result<PipelineResult, String>> = results
                .into_iter()
                .map(|m| m.into_inner().expect("result slot").expect("every item ran"))
                .collect();
            let reports: Vec<ItemReport> = items
                .iter()
                .zip(outcomes.iter().cloned())
                .map(|(item, o)| item_report(item, &matcher, o))
                .collect();
            RunReport {
                run,
                summary: summarize(&reports, opts.averaging),
                items: reports,
                traces: outcomes.into_iter().map(Result::ok).collect(),
            }
        })
        .collect::<Vec<_>>();
    EvalReport {
        config: ConfigSnapshot {
            model: cfg.backend.model.clone(),
            prices: cfg.model_prices(),
            budget_secs: cfg.budget.as_secs_f64(),
            roles: cfg.roles.clone(),
            options: opts.clone(),
        },
        mean: mean_summary(&runs, opts.averaging),
        runs,
    }
}

/// Per-item F1 keyed by id, handy for comparisons.
pub fn f1_by_id(run: &RunReport) -> BTreeMap<String, f64> {
    run.items.iter().map(|i| (i.id.clone(), i.scores.f1)).collect()
}
