use std::collections::BTreeSet;

use crate::index::normalize;
use crate::llm::{TemplateId, Vars};
use crate::sparql::{parse, SparqlTemplate};

use super::parse::{extract_query, parse_answer_type, parse_triplets};
use super::{AnswerType, RoleContext, RoleError, TripleMention};

fn question_vars(question: &str) -> Vars {
    Vars::from([("question".to_string(), question.to_string())])
}

/// Asks once, re-asks once on a parse failure, and returns the last raw reply
/// on failure.
fn ask_parsed<T>(
    ctx: &RoleContext<'_>,
    id: TemplateId,
    prompt: &str,
    temperature: f64,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Result<T, String>, RoleError> {
    let first = ctx.gateway.complete(id, prompt, temperature)?;
    match parse(&first.text) {
        Ok(v) => return Ok(Ok(v)),
        Err(why) => log::debug!("{id}: {why}; re-asking"),
    }
    let second = ctx.gateway.reask(id, prompt, temperature)?;
    Ok(parse(&second.text))
}

pub fn extract_triplets(
    ctx: &RoleContext<'_>,
    question: &str,
    temperature: f64,
) -> Result<Vec<TripleMention>, RoleError> {
    let prompt = ctx
        .gateway
        .render(TemplateId::Triplet, &question_vars(question), ctx.cfg.n_shots)?;
    let parsed = ask_parsed(ctx, TemplateId::Triplet, &prompt, temperature, |text| {
        let t = parse_triplets(text);
        if t.is_empty() {
            Err(text.to_string())
        } else {
            Ok(t)
        }
    })?;
    parsed.map_err(RoleError::ExtractionFailed)
}

/// Unrecognised labels fall back to `select` after one re-ask.
pub fn classify_answer_type(
    ctx: &RoleContext<'_>,
    question: &str,
) -> Result<(AnswerType, Option<String>), RoleError> {
    let prompt = ctx
        .gateway
        .render(TemplateId::Classify, &question_vars(question), ctx.cfg.n_shots)?;
    let parsed = ask_parsed(ctx, TemplateId::Classify, &prompt, 0.0, |text| {
        parse_answer_type(text).ok_or_else(|| text.to_string())
    })?;
    Ok(match parsed {
        Ok(t) => (t, None),
        Err(text) => {
            let warning = format!("unrecognised answer type {text:?}; using select");
            log::warn!("{warning}");
            (AnswerType::Select, Some(warning))
        }
    })
}

/// Generates and parses a template whose slots must all name mentions.
pub fn generate_template(
    ctx: &RoleContext<'_>,
    question: &str,
    mentions: &[TripleMention],
    temperature: f64,
) -> Result<SparqlTemplate, RoleError> {
    let triplets: Vec<String> = mentions.iter().map(ToString::to_string).collect();
    let mut vars = question_vars(question);
    vars.insert("triplets".into(), triplets.join(" "));
    let prompt = ctx.gateway.render(TemplateId::Template, &vars, ctx.cfg.n_shots)?;

    let known: BTreeSet<String> = mentions
        .iter()
        .flat_map(|m| [&m.subject, &m.relation, &m.object])
        .filter_map(|m| m.explicit())
        .map(normalize)
        .collect();
    let check = |text: &str| -> Result<SparqlTemplate, String> {
        let query = extract_query(text).ok_or("no SELECT or ASK in reply")?;
        let t = parse(&query).map_err(|e| e.to_string())?;
        let stray: Vec<String> = t
            .slots()
            .into_iter()
            .filter(|s| !known.contains(&normalize(&s.text)))
            .map(|s| s.text)
            .collect();
        if !stray.is_empty() {
            return Err(format!("slots not among mentions: {}", stray.join(", ")));
        }
        Ok(t)
    };
    ask_parsed(ctx, TemplateId::Template, &prompt, temperature, check)?
        .map_err(RoleError::TemplateFailed)
}
