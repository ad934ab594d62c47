//! Shared test oracles and generators. Also compiled into the CLI
//! acceptance suite via `#[path]`, so it only depends on the public API.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use proptest::prelude::*;
use triad_core::index::CandidateSource;
use triad_core::kb::{PatternTerm, ResultSet, Term, Triple, TriplePattern};
use triad_core::sparql::{
    CountTarget, Feature, Form, Location, Projection, SparqlQuery, SparqlTemplate, TemplatePattern, TemplateTerm,
    Unsupported,
};
use triad_core::{KbStore, UriCandidate};

pub const NS: &str = "http://ex.org/";

pub fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/toy")
}

pub fn iri(local: &str) -> Term {
    Term::iri(format!("{NS}{local}"))
}

// Small vocabularies so random patterns actually join.
const ENTITIES: usize = 7;
const PREDICATES: usize = 4;
const LITERALS: usize = 3;

fn entity() -> impl Strategy<Value = Term> {
    (0..ENTITIES).prop_map(|i| iri(&format!("e{i}")))
}

fn predicate() -> impl Strategy<Value = Term> {
    (0..PREDICATES).prop_map(|i| iri(&format!("p{i}")))
}

fn object() -> impl Strategy<Value = Term> {
    prop_oneof![
        4 => entity(),
        1 => (0..LITERALS).prop_map(|i| Term::literal(format!("lit {i}"))),
        1 => (0..LITERALS).prop_map(|i| Term::lang_literal(format!("lit {i}"), "en")),
    ]
}

pub fn triple() -> impl Strategy<Value = Triple> {
    (entity(), predicate(), object()).prop_map(|(s, p, o)| Triple::new(s, p, o))
}

pub fn triples(max: usize) -> impl Strategy<Value = Vec<Triple>> {
    prop::collection::vec(triple(), 0..=max)
}

pub fn store_of(triples: &[Triple]) -> KbStore {
    KbStore::from_triples(triples.iter().cloned(), &[])
}

fn var() -> impl Strategy<Value = PatternTerm> {
    prop::sample::select(vec!["a", "b", "c"]).prop_map(PatternTerm::var)
}

fn position(constant: impl Strategy<Value = Term>) -> impl Strategy<Value = PatternTerm> {
    // An occasional IRI outside the store exercises the unknown-constant path.
    prop_oneof![
        3 => var(),
        2 => constant.prop_map(PatternTerm::Const),
        1 => Just(PatternTerm::Const(iri("absent"))),
    ]
}

pub fn pattern() -> impl Strategy<Value = TriplePattern> {
    (position(entity()), position(predicate()), position(object()))
        .prop_map(|(s, p, o)| TriplePattern::new(s, p, o))
}

fn pattern_vars(patterns: &[TriplePattern]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for p in patterns {
        for v in p.variables() {
            if !out.iter().any(|x| x == v) {
                out.push(v.to_string());
            }
        }
    }
    out
}

fn form_over(vars: Vec<String>) -> BoxedStrategy<Form> {
    let ask = Just(Form::Ask).boxed();
    if vars.is_empty() {
        let count = any::<bool>()
            .prop_map(|distinct| Form::Count {
                distinct,
                target: CountTarget::All,
                alias: None,
            })
            .boxed();
        let select = any::<bool>()
            .prop_map(|distinct| Form::Select {
                distinct,
                projection: Projection::All,
            })
            .boxed();
        return prop_oneof![ask, count, select].boxed();
    }
    let n = vars.len();
    let subset = {
        let vars = vars.clone();
        prop::sample::subsequence(vars, 1..=n).prop_shuffle()
    };
    let select = (any::<bool>(), prop::option::of(subset)).prop_map(|(distinct, vs)| Form::Select {
        distinct,
        projection: vs.map_or(Projection::All, Projection::Vars),
    });
    let target = prop_oneof![
        Just(CountTarget::All),
        prop::sample::select(vars).prop_map(CountTarget::Var),
    ];
    let count = (any::<bool>(), target, prop::option::of(Just("n".to_string()))).prop_map(
        |(distinct, target, alias)| Form::Count {
            distinct,
            target,
            alias,
        },
    );
    prop_oneof![ask, select, count].boxed()
}

/// Conjunctive query with 1..=3 patterns over at most three variables.
pub fn query() -> impl Strategy<Value = SparqlQuery> {
    prop::collection::vec(pattern(), 1..=3).prop_flat_map(|patterns| {
        let vars = pattern_vars(&patterns);
        form_over(vars).prop_map(move |form| SparqlQuery {
            form,
            patterns: patterns.clone(),
            unsupported: Vec::new(),
            assignment: BTreeMap::new(),
        })
    })
}

/// Brute-force evaluation: tries every assignment of store terms to the
/// query variables and keeps those under which every pattern is a stored
/// triple. Shares nothing with the executor beyond the public types.
pub fn brute_force(store: &KbStore, q: &SparqlQuery) -> ResultSet {
    let facts: BTreeSet<Triple> = store.triples().collect();
    let mut domain: BTreeSet<Term> = BTreeSet::new();
    for t in &facts {
        domain.extend([t.subject.clone(), t.predicate.clone(), t.object.clone()]);
    }
    let domain: Vec<Term> = domain.into_iter().collect();
    let vars = pattern_vars(&q.patterns);

    // With no variables this is a single empty assignment.
    let mut solutions: Vec<Vec<Term>> = Vec::new();
    let total = domain.len().pow(vars.len() as u32);
    for mut code in 0..total {
        let mut values = Vec::with_capacity(vars.len());
        for _ in &vars {
            values.push(domain[code % domain.len()].clone());
            code /= domain.len();
        }
        let lookup = |t: &PatternTerm| match t {
            PatternTerm::Const(c) => c.clone(),
            PatternTerm::Var(v) => values[vars.iter().position(|x| x == v).unwrap()].clone(),
        };
        if q.patterns.iter().all(|p| {
            let t = Triple::new(lookup(&p.subject), lookup(&p.predicate), lookup(&p.object));
            facts.contains(&t)
        }) {
            solutions.push(values);
        }
    }
    let col = |v: &str| vars.iter().position(|x| x == v).unwrap();

    match &q.form {
        Form::Ask => ResultSet::Boolean {
            value: !solutions.is_empty(),
        },
        Form::Count { distinct, target, .. } => {
            let value = match target {
                CountTarget::Var(v) if *distinct => {
                    solutions.iter().map(|s| s[col(v)].clone()).collect::<BTreeSet<_>>().len()
                }
                _ => solutions.len(),
            };
            ResultSet::Count { value: value as u64 }
        }
        Form::Select { distinct, projection } => {
            let projected: Vec<String> = match projection {
                Projection::All => vars.clone(),
                Projection::Vars(vs) => vs.clone(),
            };
            let mut rows: Vec<Vec<Term>> = solutions
                .iter()
                .map(|s| projected.iter().map(|v| s[col(v)].clone()).collect())
                .collect();
            rows.sort();
            if *distinct {
                rows.dedup();
            }
            ResultSet::Bindings {
                variables: projected,
                rows,
            }
        }
    }
}

/// Candidate-enumeration case: a template over `sizes.len()` distinct slots
/// with `sizes[i]` candidates for slot `i`, and a cap.
#[derive(Debug, Clone)]
pub struct EnumCase {
    pub template: SparqlTemplate,
    pub entities: BTreeMap<String, Vec<UriCandidate>>,
    pub relations: BTreeMap<String, Vec<UriCandidate>>,
    pub sizes: Vec<usize>,
    pub cap: usize,
}

fn candidates(slot: &str, n: usize) -> Vec<UriCandidate> {
    (0..n)
        .map(|j| UriCandidate {
            uri: format!("{NS}{}_{j}", slot.replace(' ', "_")),
            label: format!("{slot} {j}"),
            score: (n - j) as f64,
            rank: j + 1,
            source: CandidateSource::TextFilter,
        })
        .collect()
}

pub fn enum_case() -> impl Strategy<Value = EnumCase> {
    (
        prop::collection::vec((any::<bool>(), 1usize..=5), 1..=4),
        1usize..=80,
        prop::sample::select(vec![FormKindChoice::Select, FormKindChoice::Ask, FormKindChoice::Count]),
    )
        .prop_map(|(slots, cap, form)| {
            let mut patterns: Vec<TemplatePattern> = Vec::new();
            let mut entities = BTreeMap::new();
            let mut relations = BTreeMap::new();
            let mut sizes = Vec::new();
            for (i, (is_relation, n)) in slots.into_iter().enumerate() {
                let text = format!("slot {i}");
                sizes.push(n);
                if is_relation {
                    patterns.push(TemplatePattern::new(
                        TemplateTerm::Var("x".into()),
                        TemplateTerm::Slot(text.clone()),
                        TemplateTerm::Var(format!("o{i}")),
                    ));
                    relations.insert(text.clone(), candidates(&text, n));
                } else {
                    patterns.push(TemplatePattern::new(
                        TemplateTerm::Var("x".into()),
                        TemplateTerm::Var(format!("p{i}")),
                        TemplateTerm::Slot(text.clone()),
                    ));
                    entities.insert(text.clone(), candidates(&text, n));
                }
            }
            EnumCase {
                template: SparqlTemplate {
                    form: form.form(),
                    patterns,
                    unsupported: Vec::new(),
                    raw: String::new(),
                },
                entities,
                relations,
                sizes,
                cap,
            }
        })
}

#[derive(Debug, Clone, Copy)]
pub enum FormKindChoice {
    Select,
    Ask,
    Count,
}

impl FormKindChoice {
    fn form(self) -> Form {
        match self {
            FormKindChoice::Select => Form::Select {
                distinct: true,
                projection: Projection::Vars(vec!["x".into()]),
            },
            FormKindChoice::Ask => Form::Ask,
            FormKindChoice::Count => Form::Count {
                distinct: false,
                target: CountTarget::All,
                alias: None,
            },
        }
    }
}

fn template_term(position: usize) -> impl Strategy<Value = TemplateTerm> {
    let slot_texts = vec!["camel", "River Clyde", "Jacques Van't Hart", "founder", "flows through"];
    let consts: BoxedStrategy<Term> = if position == 2 {
        prop_oneof![
            entity(),
            "[a-z]{0,6}( [a-z]{1,4})?".prop_map(Term::literal),
            "[a-z]{1,6}".prop_map(|s| Term::lang_literal(s, "en")),
            (0u32..1000).prop_map(|n| Term::typed_literal(n.to_string(), triad_core::kb::XSD_INTEGER)),
            Just(Term::literal("say \"hi\"\\now")),
        ]
        .boxed()
    } else if position == 1 {
        predicate().boxed()
    } else {
        entity().boxed()
    };
    prop_oneof![
        prop::sample::select(vec!["a", "b", "city", "x1"]).prop_map(|v| TemplateTerm::Var(v.into())),
        consts.prop_map(TemplateTerm::Const),
        prop::sample::select(slot_texts).prop_map(|s| TemplateTerm::Slot(s.into())),
    ]
}

fn unsupported() -> impl Strategy<Value = Unsupported> {
    prop::sample::select(vec![
        (Feature::Filter, Location::Where, "FILTER(?a != ?b)"),
        (Feature::Optional, Location::Where, "OPTIONAL { ?a <http://ex.org/p0> ?b . }"),
        (Feature::OrderBy, Location::Modifier, "ORDER BY ?a"),
        (Feature::Limit, Location::Modifier, "LIMIT 5"),
    ])
    .prop_map(|(feature, location, text)| Unsupported {
        feature,
        location,
        text: text.to_string(),
    })
}

/// Random well-formed template: every projected variable occurs in a pattern.
pub fn template() -> impl Strategy<Value = SparqlTemplate> {
    let pat = (template_term(0), template_term(1), template_term(2))
        .prop_map(|(s, p, o)| TemplatePattern::new(s, p, o));
    (prop::collection::vec(pat, 1..=3), prop::collection::vec(unsupported(), 0..=2)).prop_flat_map(
        |(patterns, mut extra)| {
            // The renderer places extras by location; keep that order.
            extra.sort_by_key(|u| u.location == Location::Modifier);
            let mut vars: Vec<String> = Vec::new();
            for p in &patterns {
                for t in p.positions() {
                    if let TemplateTerm::Var(v) = t {
                        if !vars.contains(v) {
                            vars.push(v.clone());
                        }
                    }
                }
            }
            form_over(vars).prop_map(move |form| SparqlTemplate {
                form,
                patterns: patterns.clone(),
                unsupported: extra.clone(),
                raw: String::new(),
            })
        },
    )
}

/// Product of list sizes, saturating.
pub fn product(sizes: &[usize]) -> usize {
    sizes.iter().fold(1usize, |a, &n| a.saturating_mul(n))
}

/// Fixed variables the golden prompt files were written against.
pub fn golden_vars(id: triad_core::TemplateId) -> triad_core::llm::Vars {
    use triad_core::TemplateId as T;
    let uris = match id {
        T::RelationSelect => "http://toy.example/ontology/phylum\nhttp://toy.example/ontology/class",
        _ => "http://toy.example/resource/Camel\nhttp://toy.example/resource/Horse",
    };
    [
        ("question", "Is camel of the chordate phylum?"),
        ("triplets", "<camel, phylum, chordate>"),
        ("k", "2"),
        ("entity", "camel"),
        ("uris", uris),
        ("entities", "camel (camel)\nchordate (Chordate)"),
        (
            "queries",
            "ASK WHERE { <http://toy.example/resource/Camel> <http://toy.example/ontology/phylum> <http://toy.example/resource/Chordate> . }",
        ),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Template ids whose rendering differs from its golden file, after
/// collapsing whitespace. The triplet prompt is rendered with three shots.
pub fn golden_prompt_mismatches() -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/prompts");
    let mut bad = Vec::new();
    for id in triad_core::TemplateId::ALL {
        let shots = if id == triad_core::TemplateId::Triplet { 3 } else { 0 };
        let vars = golden_vars(id);
        let rendered = triad_core::llm::builtin(id).render(&vars, shots);
        let golden = std::fs::read_to_string(dir.join(format!("{id}.txt")));
        match (rendered, golden) {
            (Ok(r), Ok(g)) if collapse(&r) == collapse(&g) => {}
            (Ok(r), Ok(g)) => {
                let (r, g) = (collapse(&r), collapse(&g));
                let at = r.chars().zip(g.chars()).take_while(|(a, b)| a == b).count();
                let near: String = r.chars().skip(at.saturating_sub(20)).take(60).collect();
                bad.push(format!("{id}: differs at char {at} near {near:?}"));
            }
            (Err(e), _) => bad.push(format!("{id}: {e}")),
            (_, Err(e)) => bad.push(format!("{id}: golden file: {e}")),
        }
    }
    bad
}

// ---- pipeline fixtures and trace checks ----

use std::sync::Arc;

use triad_core::kb::ResultSet as Rs;
use triad_core::llm::{Phase, Script, ScriptedBackend};
use triad_core::orchestrator::AttemptTrace;
use triad_core::roles::{Links, VerdictKind};
use triad_core::sparql::FormKind;
use triad_core::{AnswerType, AnswerValue, Deps, Gateway, Pipeline, PipelineConfig, PipelineResult, Prices, RoleConfig};

pub fn toy_config() -> PipelineConfig {
    PipelineConfig::load(toy_dir().join("config.toml")).expect("toy config")
}

pub fn toy_deps() -> Deps {
    Deps::load(&toy_config()).expect("toy kb")
}

pub fn toy_items() -> Vec<triad_core::BenchmarkItem> {
    triad_core::load_benchmark(toy_dir().join("benchmark.json")).expect("toy benchmark")
}

pub fn script(pairs: &[(&str, &[&str])]) -> Script {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
        .collect()
}

pub const HALLUCINATED_ENTITY: &str = "http://evil.example/Golden_Mile";
pub const HALLUCINATED_RELATION: &str = "http://evil.example/won";

/// A question no attempt can answer from the toy KB: nothing has Golden Mile
/// as its object. Every selection reply leads with a URI outside any pool.
pub fn retry_fixture(deps: &Deps, retries: usize) -> PipelineResult {
    let entity_reply = format!("{HALLUCINATED_ENTITY}\nhttp://toy.example/resource/Golden_Mile");
    let relation_reply = format!("{HALLUCINATED_RELATION}\nhttp://toy.example/ontology/breeder");
    let many = |s: &str| vec![s.to_string(); 12];
    let mut s = script(&[
        ("triplet", &["<Golden Mile, won, ?race>", "<Golden Mile, won, ?race>"]),
        ("classify", &["<select>"]),
        ("template", &["SELECT ?race WHERE { ?race <won> <Golden Mile> }"; 6]),
        ("answer-fact", &["Grand National"]),
    ]);
    s.insert("entity-select".into(), many(&entity_reply));
    s.insert("relation-select".into(), many(&relation_reply));
    let cfg = RoleConfig {
        retries,
        filter_pool: 1,
        k_entity: 1,
        ..RoleConfig::default()
    };
    let gateway = Gateway::new(Arc::new(ScriptedBackend::new(s)), "toy-model", 512);
    Pipeline::new(deps, &cfg).run("Which races did Golden Mile win?", &gateway).expect("pipeline runs")
}

fn uris(list: &[UriCandidate]) -> BTreeSet<&str> {
    list.iter().map(|c| c.uri.as_str()).collect()
}

/// Selected URIs outside their offered pool, or more selections than `k`.
pub fn containment_violations(r: &PipelineResult, cfg: &RoleConfig) -> Vec<String> {
    let mut bad = Vec::new();
    for a in &r.attempts {
        for (links, k, what) in [(&a.entities, cfg.k_entity, "entity"), (&a.relations, cfg.k_relation, "relation")] {
            for (mention, l) in links {
                let pool = uris(&l.pool);
                for c in &l.selected {
                    if !pool.contains(c.uri.as_str()) {
                        bad.push(format!("attempt {}: {what} {mention:?} selected {} outside its pool", a.index, c.uri));
                    }
                }
                if l.selected.len() > k {
                    bad.push(format!("attempt {}: {what} {mention:?} has {} selections", a.index, l.selected.len()));
                }
            }
        }
    }
    bad
}

fn pool_shrinks(prev: &Links, next: &Links) -> Vec<String> {
    let mut bad = Vec::new();
    for (mention, l) in prev {
        if let Some(n) = next.get(mention) {
            let after = uris(&n.pool);
            for u in uris(&l.pool) {
                if !after.contains(u) {
                    bad.push(format!("{mention:?} lost {u}"));
                }
            }
        }
    }
    bad
}

/// Pool URIs of a mention that vanish between consecutive attempts.
pub fn monotonicity_violations(attempts: &[AttemptTrace]) -> Vec<String> {
    attempts
        .windows(2)
        .flat_map(|w| {
            let mut v = pool_shrinks(&w[0].entities, &w[1].entities);
            v.extend(pool_shrinks(&w[0].relations, &w[1].relations));
            v.into_iter().map(move |m| format!("attempt {} -> {}: {m}", w[0].index, w[1].index))
        })
        .collect()
}

/// Re-executes every candidate verdict against the store.
pub fn executability_violations(store: &KbStore, r: &PipelineResult) -> Vec<String> {
    let mut bad = Vec::new();
    for a in &r.attempts {
        for v in &a.candidates {
            let q = match SparqlQuery::parse(&v.query) {
                Ok(q) => q,
                Err(e) => {
                    bad.push(format!("candidate does not parse: {e}: {}", v.query));
                    continue;
                }
            };
            if !q.unsupported.is_empty() {
                continue;
            }
            let result = store.execute(&q);
            let productive = match (&result, q.form.kind()) {
                (Ok(Rs::Bindings { rows, .. }), FormKind::Select) => !rows.is_empty(),
                (Ok(Rs::Count { value }), FormKind::Count) => *value > 0,
                (Ok(Rs::Boolean { .. }), FormKind::Ask) => true,
                _ => false,
            };
            match (v.verdict, q.form.kind()) {
                (VerdictKind::Survived, _) if !productive => bad.push(format!("survivor is empty: {}", v.query)),
                (kind, FormKind::Ask) if kind != VerdictKind::Survived => {
                    bad.push(format!("ASK candidate filtered as {kind:?}: {}", v.query))
                }
                (VerdictKind::Empty, _) if productive => bad.push(format!("productive query marked empty: {}", v.query)),
                _ => {}
            }
        }
    }
    bad
}

/// Cost must equal the token sum over the call log, priced per 1k tokens.
pub fn cost_violations(r: &PipelineResult, prices: &Prices) -> Vec<String> {
    let prompt: u64 = r.calls.iter().map(|c| c.prompt_tokens).sum();
    let completion: u64 = r.calls.iter().map(|c| c.completion_tokens).sum();
    let expected =
        (prompt as f64 * prices.prompt_price_per_1k + completion as f64 * prices.completion_price_per_1k) / 1000.0;
    let mut bad = Vec::new();
    if r.cost != expected {
        bad.push(format!("cost {} but token sum gives {expected}", r.cost));
    }
    if (r.usage.prompt_tokens, r.usage.completion_tokens, r.usage.calls) != (prompt, completion, r.calls.len() as u64) {
        bad.push(format!("usage {:?} disagrees with the call log", r.usage));
    }
    bad
}

/// Call log numbering, phase attribution, call bound, timing sums and the
/// answer's type.
pub fn trace_violations(r: &PipelineResult, backend_calls: usize) -> Vec<String> {
    let mut bad = Vec::new();
    if r.calls.len() != backend_calls {
        bad.push(format!("{} calls in the trace, {backend_calls} at the backend", r.calls.len()));
    }
    if !r.calls.iter().enumerate().all(|(i, c)| c.seq == i) {
        bad.push("call sequence numbers are not 0..n".into());
    }
    if r.calls.len() > r.call_bound {
        bad.push(format!("{} calls exceed the bound {}", r.calls.len(), r.call_bound));
    }
    for c in &r.calls {
        if c.attempt > r.attempts.len() {
            bad.push(format!("call {} names attempt {} of {}", c.seq, c.attempt, r.attempts.len()));
        }
    }
    for p in Phase::ALL {
        let sum: u64 = r.calls.iter().filter(|c| c.phase == p).map(|c| c.latency_ms).sum();
        if r.llm_latency_ms.get(p) != sum as f64 {
            bad.push(format!("{p:?} latency {} but calls sum to {sum}", r.llm_latency_ms.get(p)));
        }
    }
    let all: u64 = r.calls.iter().map(|c| c.latency_ms).sum();
    if r.llm_latency_ms.sum() != all as f64 {
        bad.push("phase latencies do not add up to the total".into());
    }
    if r.wall_ms.sum() > r.total_wall_ms + 1e-6 {
        bad.push(format!("phase wall time {} exceeds total {}", r.wall_ms.sum(), r.total_wall_ms));
    }
    if r.answer.kind != r.answer_type {
        bad.push(format!("answer kind {:?} for a {:?} question", r.answer.kind, r.answer_type));
    }
    let payload_ok = matches!(
        (&r.answer.value, r.answer_type),
        (AnswerValue::Empty, _)
            | (AnswerValue::Boolean(_), AnswerType::Boolean)
            | (AnswerValue::Count(_), AnswerType::Count)
            | (AnswerValue::Values(_), AnswerType::Select)
    );
    if !payload_ok || (r.answer.is_abstain() != (r.answer.value == AnswerValue::Empty)) {
        bad.push(format!("payload {:?} does not fit {:?}", r.answer.value, r.answer_type));
    }
    bad
}

/// Runs one toy item against `<dir>/<id>.jsonl` in strict replay and checks
/// the transcript was consumed. Returns the result and the record count.
pub fn replay_item(deps: &Deps, dir: &str, item: &triad_core::BenchmarkItem) -> Result<(PipelineResult, usize), String> {
    let cfg = toy_config();
    let path = toy_dir().join(dir).join(format!("{}.jsonl", item.id));
    let backend = Arc::new(triad_core::ReplayBackend::from_path(&path, true).map_err(|e| e.to_string())?);
    let total = backend.remaining();
    let gateway = Gateway::new(backend.clone(), cfg.backend.model.clone(), cfg.backend.max_tokens);
    let r = Pipeline::from_config(deps, &cfg)
        .run(&item.question, &gateway)
        .map_err(|e| format!("{}: {e}", item.id))?;
    if backend.remaining() != 0 {
        return Err(format!("{}: {} transcript records unused", item.id, backend.remaining()));
    }
    Ok((r, total))
}
