//! The four-phase pipeline: question parsing, URI linking, query
//! construction and answer generation, with a bounded retry loop.
//!
//! Each retry re-enters at entity selection with the filter pool doubled and
//! the selection temperature raised. The final retry may also re-extract the
//! triples and regenerate the template. Pools only grow across attempts
//! because each attempt's pool is unioned with the previous one.

mod backend;
mod config;

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::index::MentionIndex;
use crate::kb::{KbError, KbStore};
use crate::llm::{CallRecord, Gateway, LlmError, Phase, Prices, Usage};
use crate::roles::{
    self, entity_mentions, relation_mentions, Answer, AnswerType, Links, RoleConfig, RoleContext, RoleError,
    TripleMention, Verdict,
};
use crate::sparql::{SparqlQuery, SparqlTemplate};

pub use backend::{BackendSource, RecordTarget};
pub use config::{BackendConfig, BackendKind, ConfigError, PipelineConfig, MAX_SHOTS};

/// Immutable per-run resources shared by all questions.
pub struct Deps {
    pub store: KbStore,
    pub index: MentionIndex,
}

impl Deps {
    /// Loads the KB and reuses the index snapshot when it belongs to it.
    pub fn load(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let kb = cfg.kb.as_deref().ok_or(PipelineError::NoKb)?;
        let store = KbStore::load(kb, &cfg.load)?;
        let index = MentionIndex::load_or_build(cfg.index.as_deref(), &store);
        Ok(Self { store, index })
    }

    pub fn from_store(store: KbStore) -> Self {
        let index = MentionIndex::build(&store);
        Self { store, index }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("knowledge base is empty")]
    EmptyStore,
    #[error("no knowledge base path configured")]
    NoKb,
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Role(RoleError),
}

impl From<RoleError> for PipelineError {
    fn from(e: RoleError) -> Self {
        match e {
            RoleError::Llm(e) => PipelineError::Llm(e),
            other => PipelineError::Role(other),
        }
    }
}

/// Milliseconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    #[serde(rename = "QP")]
    pub qp: f64,
    #[serde(rename = "UL")]
    pub ul: f64,
    #[serde(rename = "QC")]
    pub qc: f64,
    #[serde(rename = "AG")]
    pub ag: f64,
}

impl PhaseTimes {
    pub fn get_mut(&mut self, p: Phase) -> &mut f64 {
        match p {
            Phase::Qp => &mut self.qp,
            Phase::Ul => &mut self.ul,
            Phase::Qc => &mut self.qc,
            Phase::Ag => &mut self.ag,
        }
    }

    pub fn get(&self, p: Phase) -> f64 {
        match p {
            Phase::Qp => self.qp,
            Phase::Ul => self.ul,
            Phase::Qc => self.qc,
            Phase::Ag => self.ag,
        }
    }

    pub fn sum(&self) -> f64 {
        self.qp + self.ul + self.qc + self.ag
    }

    pub fn add(&mut self, other: &PhaseTimes) {
        for p in Phase::ALL {
            *self.get_mut(p) += other.get(p);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AttemptOutcome {
    Answered,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptTrace {
    pub index: usize,
    pub temperature: f64,
    pub filter_pool: usize,
    /// Triples were extracted again at the start of this attempt.
    pub reextracted: bool,
    pub mentions: Vec<TripleMention>,
    pub entities: Links,
    pub relations: Links,
    /// Template was (re)generated during this attempt.
    pub template_generated: bool,
    pub template: Option<String>,
    pub candidates: Vec<Verdict>,
    pub query: Option<String>,
    pub outcome: AttemptOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub question: String,
    pub mentions: Vec<TripleMention>,
    pub answer_type: AnswerType,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub entities: Links,
    pub relations: Links,
    pub template: Option<String>,
    pub candidates: Vec<Verdict>,
    pub final_query: Option<String>,
    pub answer: Answer,
    pub attempts: Vec<AttemptTrace>,
    pub calls: Vec<CallRecord>,
    /// Upper bound on LLM calls given the mentions and attempts made.
    pub call_bound: usize,
    pub budget_exhausted: bool,
    /// Wall-clock time per phase.
    pub wall_ms: PhaseTimes,
    pub total_wall_ms: f64,
    /// Backend-reported latency per phase.
    pub llm_latency_ms: PhaseTimes,
    pub usage: Usage,
    pub cost: f64,
}

impl PipelineResult {
    /// Copy with wall-clock fields zeroed, for byte comparison across runs.
    pub fn without_wall_clock(&self) -> Self {
        Self {
            wall_ms: PhaseTimes::default(),
            total_wall_ms: 0.0,
            ..self.clone()
        }
    }
}

/// LLM calls one attempt can make: one selection per entity and relation
/// mention, a template with one re-ask, and one query selection.
fn attempt_bound(mentions: &[TripleMention]) -> usize {
    entity_mentions(mentions).len() + relation_mentions(mentions).len() + 3
}

/// Extraction and classification with one re-ask each.
const PARSE_CALLS: usize = 4;
/// Fallback answering with one re-ask.
const FALLBACK_CALLS: usize = 2;

pub struct Pipeline<'a> {
    pub deps: &'a Deps,
    pub cfg: &'a RoleConfig,
    pub budget: Duration,
    pub prices: Prices,
}

struct Clock {
    start: Instant,
    wall: PhaseTimes,
}

impl Clock {
    fn time<T>(&mut self, gateway: &Gateway, phase: Phase, attempt: usize, f: impl FnOnce() -> T) -> T {
        gateway.set_context(phase, attempt);
        let t = Instant::now();
        let out = f();
        *self.wall.get_mut(phase) += t.elapsed().as_secs_f64() * 1000.0;
        out
    }
}

/// Method-level failures become a trace entry; infrastructure ones escape.
fn soft<T>(r: Result<T, RoleError>) -> Result<Result<T, RoleError>, PipelineError> {
    match r {
        Err(RoleError::Llm(e)) => Err(PipelineError::Llm(e)),
        other => Ok(other),
    }
}

impl<'a> Pipeline<'a> {
    pub fn new(deps: &'a Deps, cfg: &'a RoleConfig) -> Self {
        Self {
            deps,
            cfg,
            budget: Duration::from_secs(120),
            prices: Prices::default(),
        }
    }

    pub fn from_config(deps: &'a Deps, cfg: &'a PipelineConfig) -> Self {
        Self {
            deps,
            cfg: &cfg.roles,
            budget: cfg.budget,
            prices: cfg.model_prices(),
        }
    }

    pub fn run(&self, question: &str, gateway: &Gateway) -> Result<PipelineResult, PipelineError> {
        if self.deps.store.is_empty() {
            return Err(PipelineError::EmptyStore);
        }
        let ctx = RoleContext {
            gateway,
            store: &self.deps.store,
            index: &self.deps.index,
            cfg: self.cfg,
        };
        let cfg = self.cfg;
        let mut clock = Clock {
            start: Instant::now(),
            wall: PhaseTimes::default(),
        };
        let mut warnings = Vec::new();

        let extracted = clock.time(gateway, Phase::Qp, 0, || roles::extract_triplets(&ctx, question, 0.0));
        let extracted = soft(extracted)?;
        let (answer_type, warning) =
            clock.time(gateway, Phase::Qp, 0, || roles::classify_answer_type(&ctx, question))?;
        warnings.extend(warning);

        let mut mentions = Vec::new();
        let mut attempts: Vec<AttemptTrace> = Vec::new();
        let mut answer: Option<Answer> = None;
        let mut final_query: Option<SparqlQuery> = None;
        let mut budget_exhausted = false;
        let mut reextractions = 0;
        let mut bound = PARSE_CALLS + FALLBACK_CALLS;

        match extracted {
            Err(e) => warnings.push(format!("triple extraction failed: {e}")),
            Ok(m) => mentions = m,
        }

        let mut entities = Links::new();
        let mut relations = Links::new();
        let mut template: Option<SparqlTemplate> = None;

        if !mentions.is_empty() {
            for attempt in 0..=cfg.retries {
                if clock.start.elapsed() >= self.budget {
                    budget_exhausted = true;
                    warnings.push(format!("budget of {:?} exhausted before attempt {attempt}", self.budget));
                    break;
                }
                let last = attempt == cfg.retries;
                let retry = attempt > 0;
                let temperature = if retry { cfg.retry_temperature } else { 0.0 };
                let filter_pool = cfg.filter_pool << attempt.min(16);

                let mut reextracted = false;
                if last && retry && cfg.reextract_final {
                    reextractions += 1;
                    reextracted = true;
                    let again =
                        clock.time(gateway, Phase::Qp, attempt, || roles::extract_triplets(&ctx, question, temperature));
                    match soft(again)? {
                        Ok(m) if m != mentions => {
                            mentions = m;
                            template = None;
                        }
                        Ok(_) => {}
                        Err(e) => warnings.push(format!("re-extraction failed, keeping triples: {e}")),
                    }
                }
                bound += attempt_bound(&mentions);

                let mut trace = AttemptTrace {
                    index: attempt,
                    temperature,
                    filter_pool,
                    reextracted,
                    mentions: mentions.clone(),
                    entities: Links::new(),
                    relations: Links::new(),
                    template_generated: false,
                    template: None,
                    candidates: Vec::new(),
                    query: None,
                    outcome: AttemptOutcome::Answered,
                };
                let outcome = self.attempt(
                    &ctx,
                    &mut clock,
                    question,
                    answer_type,
                    &mentions,
                    &mut entities,
                    &mut relations,
                    &mut template,
                    (attempt, last, temperature, filter_pool),
                    &mut trace,
                )?;
                match outcome {
                    Ok((q, a)) => {
                        final_query = Some(q);
                        answer = Some(a);
                        attempts.push(trace);
                        break;
                    }
                    Err(e) => {
                        log::debug!("attempt {attempt} failed: {e}");
                        trace.outcome = AttemptOutcome::Failed { error: e.to_string() };
                        attempts.push(trace);
                    }
                }
            }
        }

        let answer = match answer {
            Some(a) => a,
            None => {
                let after = attempts.len();
                clock.time(gateway, Phase::Ag, after, || roles::fallback_answer(&ctx, question, answer_type))?
            }
        };
        bound += 2 * reextractions;

        let calls = gateway.calls();
        let mut llm_latency_ms = PhaseTimes::default();
        for c in &calls {
            *llm_latency_ms.get_mut(c.phase) += c.latency_ms as f64;
        }
        let usage = gateway.usage();
        let last = attempts.last();
        Ok(PipelineResult {
            question: question.to_string(),
            mentions,
            answer_type,
            warnings,
            entities: last.map(|a| a.entities.clone()).unwrap_or_default(),
            relations: last.map(|a| a.relations.clone()).unwrap_or_default(),
            template: template.as_ref().map(SparqlTemplate::render),
            candidates: last.map(|a| a.candidates.clone()).unwrap_or_default(),
            final_query: final_query.as_ref().map(SparqlQuery::render),
            answer,
            attempts,
            calls,
            call_bound: bound,
            budget_exhausted,
            total_wall_ms: clock.start.elapsed().as_secs_f64() * 1000.0,
            wall_ms: clock.wall,
            llm_latency_ms,
            cost: usage.cost(&self.prices),
            usage,
        })
    }

    /// One pass from entity selection to a KB answer.
    #[allow(clippy::too_many_arguments)]
    fn attempt(
        &self,
        ctx: &RoleContext<'_>,
        clock: &mut Clock,
        question: &str,
        answer_type: AnswerType,
        mentions: &[TripleMention],
        entities: &mut Links,
        relations: &mut Links,
        template: &mut Option<SparqlTemplate>,
        (attempt, last, temperature, filter_pool): (usize, bool, f64, usize),
        trace: &mut AttemptTrace,
    ) -> Result<Result<(SparqlQuery, Answer), RoleError>, PipelineError> {
        let gw = ctx.gateway;

        let linked = clock.time(gw, Phase::Ul, attempt, || {
            let e = roles::select_entities(ctx, question, mentions, filter_pool, temperature, entities)?;
            trace.entities = e.clone();
            *entities = e;
            let r = roles::select_relations(ctx, question, mentions, entities, filter_pool, temperature, relations)?;
            trace.relations = r.clone();
            *relations = r;
            Ok(())
        });
        if let Err(e) = soft(linked)? {
            return Ok(Err(e));
        }

        let selection = clock.time(gw, Phase::Qc, attempt, || {
            let regenerate = template.is_none() || (last && attempt > 0 && self.cfg.regenerate_final);
            if regenerate {
                trace.template_generated = true;
                let temp = if template.is_none() && attempt == 0 { 0.0 } else { temperature };
                *template = None;
                *template = Some(roles::generate_template(ctx, question, mentions, temp)?);
            }
            let t = template.as_ref().expect("template set above");
            trace.template = Some(t.render());
            roles::select_query(ctx, question, t, entities, relations, temperature)
        });
        let selection = match soft(selection)? {
            Ok(s) => s,
            Err(e) => return Ok(Err(e)),
        };
        trace.candidates = selection.verdicts.clone();
        let Some(query) = selection.chosen else {
            return Ok(Err(RoleError::NoFeasibleQuery(selection.verdicts.len())));
        };
        trace.query = Some(query.render());

        let answered = clock.time(gw, Phase::Ag, attempt, || roles::answer(ctx, &query, answer_type));
        Ok(soft(answered)?.map(|a| (query, a)))
    }
}

/// Convenience for tests and the CLI: one question end to end.
pub fn answer_question(
    deps: &Deps,
    cfg: &PipelineConfig,
    source: &BackendSource,
    id: &str,
    question: &str,
) -> Result<PipelineResult, PipelineError> {
    let gateway = source.gateway(id, &cfg.backend)?;
    Pipeline::from_config(deps, cfg).run(question, &gateway)
}

/// Snapshot-or-build helper used by `triad load`.
pub fn build_snapshot(store: &KbStore, path: &Path) -> Result<MentionIndex, crate::index::IndexError> {
    let index = MentionIndex::build(store);
    index.save(path)?;
    Ok(index)
}
