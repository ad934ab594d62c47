use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::index::{normalize, rerank, CandidateSource, Kind, UriCandidate};
use crate::kb::ExecError;
use crate::llm::{prompts::normalize_whitespace, TemplateId, Vars};
use crate::sparql::{enumerate_candidates, SlotRole, SparqlError, SparqlQuery, SparqlTemplate};

use super::parse::{extract_query, parse_uri_lines};
use super::{entity_mentions, Linking, Links, Mention, RoleContext, RoleError, TripleMention};

/// Union of `prior` and `fresh` by URI, ordered by score then URI.
fn widen(prior: Option<&Linking>, fresh: Vec<UriCandidate>) -> Vec<UriCandidate> {
    let mut by_uri: BTreeMap<String, UriCandidate> = BTreeMap::new();
    for c in prior.map(|l| l.pool.clone()).unwrap_or_default().into_iter().chain(fresh) {
        match by_uri.get(&c.uri) {
            Some(old) if old.score >= c.score => {}
            _ => {
                by_uri.insert(c.uri.clone(), c);
            }
        }
    }
    let mut pool: Vec<UriCandidate> = by_uri.into_values().collect();
    pool.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.uri.cmp(&b.uri)));
    rerank(&mut pool);
    pool
}

/// Forced choice for a single option; otherwise the LLM picks up to `k`
/// URIs, keeping only those in the pool, with the filter ranking as fallback.
fn choose(
    ctx: &RoleContext<'_>,
    id: TemplateId,
    vars: Vars,
    pool: &[UriCandidate],
    k: usize,
    temperature: f64,
) -> Result<Vec<UriCandidate>, RoleError> {
    if pool.len() == 1 {
        return Ok(pool.to_vec());
    }
    let mut vars = vars;
    vars.insert("k".into(), k.to_string());
    vars.insert(
        "uris".into(),
        pool.iter().map(|c| c.uri.as_str()).collect::<Vec<_>>().join("\n"),
    );
    let prompt = ctx.gateway.render(id, &vars, 0)?;
    let reply = ctx.gateway.complete(id, &prompt, temperature)?;
    let mut picked: Vec<UriCandidate> = Vec::new();
    for uri in parse_uri_lines(&reply.text) {
        if picked.len() == k {
            break;
        }
        match pool.iter().find(|c| c.uri == uri) {
            Some(c) if !picked.iter().any(|p| p.uri == uri) => picked.push(c.clone()),
            Some(_) => {}
            None => log::debug!("{id}: discarding {uri}, not offered"),
        }
    }
    if picked.is_empty() {
        let mut top = pool[..k.min(pool.len())].to_vec();
        rerank(&mut top);
        return Ok(top);
    }
    for (i, c) in picked.iter_mut().enumerate() {
        c.rank = i + 1;
        c.score = 1.0 / (i + 1) as f64;
        c.source = CandidateSource::LlmSelected;
    }
    Ok(picked)
}

pub fn select_entities(
    ctx: &RoleContext<'_>,
    question: &str,
    mentions: &[TripleMention],
    pool_size: usize,
    temperature: f64,
    prior: &Links,
) -> Result<Links, RoleError> {
    let mut out = Links::new();
    for text in entity_mentions(mentions) {
        let fresh = ctx.index.search(&text, Kind::Entity, pool_size);
        let pool = widen(prior.get(&text), fresh);
        if pool.is_empty() {
            return Err(RoleError::StarvedMention(text));
        }
        let vars = Vars::from([
            ("question".to_string(), question.to_string()),
            ("entity".to_string(), text.clone()),
        ]);
        let selected = choose(ctx, TemplateId::EntitySelect, vars, &pool, ctx.cfg.k_entity, temperature)?;
        out.insert(
            text.clone(),
            Linking {
                mention: text,
                pool,
                selected,
            },
        );
    }
    Ok(out)
}

fn endpoint_line(m: &Mention, entities: &Links) -> String {
    match m {
        Mention::Variable(_) => m.to_string(),
        Mention::Explicit(t) => {
            let labels: Vec<&str> = entities
                .get(t)
                .map(|l| l.selected.iter().map(|c| c.label.as_str()).collect())
                .unwrap_or_default();
            if labels.is_empty() {
                t.clone()
            } else {
                format!("{t} ({})", labels.join(", "))
            }
        }
    }
}

fn selected_uris<'a>(m: &Mention, entities: &'a Links) -> Vec<&'a str> {
    m.explicit()
        .and_then(|t| entities.get(t))
        .map(|l| l.selected.iter().map(|c| c.uri.as_str()).collect())
        .unwrap_or_default()
}

/// Relation pool for one relation mention: predicates around the selected
/// endpoint URIs, or a label search when no endpoint is explicit.
fn relation_pool(ctx: &RoleContext<'_>, text: &str, triples: &[&TripleMention], entities: &Links, pool_size: usize) -> Vec<UriCandidate> {
    let mut around: BTreeSet<String> = BTreeSet::new();
    let mut connecting: BTreeSet<String> = BTreeSet::new();
    let mut any_explicit = false;
    for t in triples {
        let subj = selected_uris(&t.subject, entities);
        let obj = selected_uris(&t.object, entities);
        any_explicit |= t.subject.explicit().is_some() || t.object.explicit().is_some();
        for u in subj.iter().chain(&obj) {
            around.extend(ctx.store.neighbors(u).into_iter().map(|(p, _)| p));
        }
        if ctx.cfg.connect_boost {
            for a in &subj {
                for b in &obj {
                    connecting.extend(ctx.store.connecting_predicates(a, b));
                }
            }
        }
    }
    if !any_explicit {
        return ctx.index.search(text, Kind::Relation, pool_size);
    }
    let mut pool = ctx.index.score_uris(text, Kind::Relation, around.iter().map(String::as_str));
    let boost = pool.iter().map(|c| c.score).fold(0.0, f64::max) + 1.0;
    for c in &mut pool {
        c.source = CandidateSource::Traversal;
        if connecting.contains(&c.uri) {
            c.score += boost;
        }
    }
    pool.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.uri.cmp(&b.uri)));
    pool.truncate(ctx.cfg.relation_pool_cap);
    rerank(&mut pool);
    pool
}

pub fn select_relations(
    ctx: &RoleContext<'_>,
    question: &str,
    mentions: &[TripleMention],
    entities: &Links,
    pool_size: usize,
    temperature: f64,
    prior: &Links,
) -> Result<Links, RoleError> {
    let mut out = Links::new();
    let mut order: Vec<&str> = Vec::new();
    for m in mentions {
        if let Some(t) = m.relation.explicit() {
            if !order.contains(&t) {
                order.push(t);
            }
        }
    }
    for text in order {
        let triples: Vec<&TripleMention> =
            mentions.iter().filter(|m| m.relation.explicit() == Some(text)).collect();
        let fresh = relation_pool(ctx, text, &triples, entities, pool_size);
        let pool = widen(prior.get(text), fresh);
        if pool.is_empty() {
            return Err(RoleError::StarvedRelation(text.to_string()));
        }
        let mut endpoints: Vec<String> = Vec::new();
        for t in &triples {
            for e in [&t.subject, &t.object] {
                let line = endpoint_line(e, entities);
                if !endpoints.contains(&line) {
                    endpoints.push(line);
                }
            }
        }
        let vars = Vars::from([
            ("question".to_string(), question.to_string()),
            ("entities".to_string(), endpoints.join("\n")),
        ]);
        let selected = choose(ctx, TemplateId::RelationSelect, vars, &pool, ctx.cfg.k_relation, temperature)?;
        out.insert(
            text.to_string(),
            Linking {
                mention: text.to_string(),
                pool,
                selected,
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Survived,
    Empty,
    Unsupported,
    Error,
}

/// Executability check outcome for one candidate query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub query: String,
    pub verdict: VerdictKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySelection {
    pub verdicts: Vec<Verdict>,
    pub chosen: Option<SparqlQuery>,
    /// Whether the LLM chose among several survivors.
    pub llm_choice: bool,
}

fn slot_candidates(
    template: &SparqlTemplate,
    role: SlotRole,
    links: &Links,
) -> BTreeMap<String, Vec<UriCandidate>> {
    let by_norm: BTreeMap<String, &Linking> =
        links.values().map(|l| (normalize(&l.mention), l)).collect();
    template
        .slots()
        .into_iter()
        .filter(|s| s.role == role)
        .filter_map(|s| {
            by_norm
                .get(&normalize(&s.text))
                .map(|l| (s.text.clone(), l.selected.clone()))
        })
        .collect()
}

/// Grounds the template, keeps the candidates that retrieve something and
/// lets the LLM choose when more than one survives.
pub fn select_query(
    ctx: &RoleContext<'_>,
    question: &str,
    template: &SparqlTemplate,
    entities: &Links,
    relations: &Links,
    temperature: f64,
) -> Result<QuerySelection, RoleError> {
    let e = slot_candidates(template, SlotRole::Entity, entities);
    let r = slot_candidates(template, SlotRole::Relation, relations);
    let candidates = match enumerate_candidates(template, &e, &r, ctx.cfg.enumeration_cap) {
        Ok(c) => c,
        Err(SparqlError::StarvedSlot(s)) => return Err(RoleError::StarvedSlot(s)),
        Err(other) => return Err(RoleError::TemplateFailed(other.to_string())),
    };
    let mut verdicts = Vec::with_capacity(candidates.len());
    let mut survivors: Vec<SparqlQuery> = Vec::new();
    for q in candidates {
        let (verdict, detail) = match ctx.store.execute(&q) {
            Ok(rs) if rs.is_productive() => (VerdictKind::Survived, None),
            Ok(_) => (VerdictKind::Empty, None),
            Err(e @ ExecError::Unsupported(_)) => (VerdictKind::Unsupported, Some(e.to_string())),
            Err(e) => (VerdictKind::Error, Some(e.to_string())),
        };
        verdicts.push(Verdict {
            query: q.render(),
            verdict,
            detail,
        });
        if verdict == VerdictKind::Survived {
            survivors.push(q);
        }
    }
    if survivors.len() <= 1 {
        return Ok(QuerySelection {
            verdicts,
            chosen: survivors.pop(),
            llm_choice: false,
        });
    }
    let renders: Vec<String> = survivors.iter().map(SparqlQuery::render).collect();
    let vars = Vars::from([
        ("question".to_string(), question.to_string()),
        ("queries".to_string(), renders.join("\n")),
    ]);
    let prompt = ctx.gateway.render(TemplateId::QuerySelect, &vars, 0)?;
    let reply = ctx.gateway.complete(TemplateId::QuerySelect, &prompt, temperature)?;
    let picked = match_query(&reply.text, &renders).unwrap_or_else(|| {
        log::debug!("query-select reply matched no candidate; using the top-ranked one");
        0
    });
    Ok(QuerySelection {
        verdicts,
        chosen: Some(survivors.swap_remove(picked)),
        llm_choice: true,
    })
}

/// Index of the offered query named in `reply`, compared after whitespace
/// normalization or, failing that, structurally.
fn match_query(reply: &str, renders: &[String]) -> Option<usize> {
    let normalized: Vec<String> = renders.iter().map(|r| normalize_whitespace(r)).collect();
    let mut texts: Vec<String> = reply.lines().map(normalize_whitespace).collect();
    texts.push(normalize_whitespace(reply));
    for t in &texts {
        let t = t.trim_start_matches(|c: char| c.is_ascii_digit() || matches!(c, '.' | ')' | '-' | ' '));
        if let Some(i) = normalized.iter().position(|n| n == t) {
            return Some(i);
        }
    }
    let q = SparqlQuery::parse(&extract_query(reply)?).ok()?;
    let r = q.render();
    renders.iter().position(|x| *x == r)
}
