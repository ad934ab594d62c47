use std::collections::BTreeSet;

use crate::kb::ResultSet;
use crate::llm::{TemplateId, Vars};
use crate::sparql::SparqlQuery;

use super::parse::{parse_boolean, parse_fact};
use super::{Answer, AnswerType, AnswerValue, Provenance, RoleContext, RoleError};

/// Executes `query` and shapes the result to the classified answer type.
pub fn answer(ctx: &RoleContext<'_>, query: &SparqlQuery, kind: AnswerType) -> Result<Answer, RoleError> {
    let result = ctx.store.execute(query)?;
    let value = coerce(result, kind)?;
    Ok(Answer {
        kind,
        value,
        provenance: Provenance::Kb,
    })
}

fn coerce(result: ResultSet, kind: AnswerType) -> Result<AnswerValue, RoleError> {
    Ok(match (kind, result) {
        (AnswerType::Boolean, ResultSet::Boolean { value }) => AnswerValue::Boolean(value),
        (AnswerType::Boolean, ResultSet::Bindings { rows, .. }) => AnswerValue::Boolean(!rows.is_empty()),
        (AnswerType::Boolean, ResultSet::Count { value }) => AnswerValue::Boolean(value > 0),
        (AnswerType::Count, ResultSet::Count { value }) => AnswerValue::Count(value),
        (AnswerType::Count, ResultSet::Bindings { rows, .. }) => AnswerValue::Count(rows.len() as u64),
        (AnswerType::Select, ResultSet::Bindings { rows, .. }) => AnswerValue::Values(
            rows.into_iter()
                .flatten()
                .map(|t| t.value().to_string())
                .collect(),
        ),
        (AnswerType::Select, ResultSet::Count { value }) => AnswerValue::Values(BTreeSet::from([value.to_string()])),
        (kind, ResultSet::Boolean { .. }) => return Err(RoleError::TypeMismatch(kind)),
    })
}

/// Answer from the model's own knowledge: yes/no for boolean questions, a
/// single fact for select questions, abstention for counts or when the
/// reply cannot be parsed after one re-ask.
pub fn fallback_answer(ctx: &RoleContext<'_>, question: &str, kind: AnswerType) -> Result<Answer, RoleError> {
    let vars = Vars::from([("question".to_string(), question.to_string())]);
    match kind {
        AnswerType::Boolean if ctx.cfg.fallback_boolean => {
            let v = ask_twice(ctx, TemplateId::AnswerBoolean, &vars, parse_boolean)?;
            Ok(v.map_or_else(
                || Answer::abstain(kind),
                |b| Answer {
                    kind,
                    value: AnswerValue::Boolean(b),
                    provenance: Provenance::LlmFallback,
                },
            ))
        }
        AnswerType::Select if ctx.cfg.fallback_fact => {
            let v = ask_twice(ctx, TemplateId::AnswerFact, &vars, parse_fact)?;
            Ok(v.map_or_else(
                || Answer::abstain(kind),
                |f| Answer {
                    kind,
                    value: AnswerValue::Values(BTreeSet::from([f])),
                    provenance: Provenance::LlmFallback,
                },
            ))
        }
        _ => Ok(Answer::abstain(kind)),
    }
}

fn ask_twice<T>(
    ctx: &RoleContext<'_>,
    id: TemplateId,
    vars: &Vars,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Option<T>, RoleError> {
    let prompt = ctx.gateway.render(id, vars, 0)?;
    let first = ctx.gateway.complete(id, &prompt, 0.0)?;
    if let Some(v) = parse(&first.text) {
        return Ok(Some(v));
    }
    let second = ctx.gateway.reask(id, &prompt, 0.0)?;
    Ok(parse(&second.text))
}
