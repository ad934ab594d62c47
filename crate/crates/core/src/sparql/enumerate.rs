use std::collections::BTreeMap;

use super::ast::{Assignment, SlotKey, SlotRole, SparqlError, SparqlQuery, SparqlTemplate};
use crate::index::UriCandidate;

/// Grounds `template` with every combination of per-slot candidates, best
/// first: ascending sum of list positions, ties broken by the assigned URI
/// sequence (slots in key order). Stops after `cap` queries.
///
/// Candidate maps are keyed by slot text; entity slots read `entity_cands`
/// and predicate slots read `relation_cands`.
pub fn enumerate_candidates(
    template: &SparqlTemplate,
    entity_cands: &BTreeMap<String, Vec<UriCandidate>>,
    relation_cands: &BTreeMap<String, Vec<UriCandidate>>,
    cap: usize,
) -> Result<Vec<SparqlQuery>, SparqlError> {
    let slots: Vec<SlotKey> = template.slots().into_iter().collect();
    let mut lists: Vec<&[UriCandidate]> = Vec::with_capacity(slots.len());
    for slot in &slots {
        let source = match slot.role {
            SlotRole::Entity => entity_cands,
            SlotRole::Relation => relation_cands,
        };
        match source.get(&slot.text) {
            Some(list) if !list.is_empty() => lists.push(list),
            _ => return Err(SparqlError::StarvedSlot(slot.clone())),
        }
    }

    let lens: Vec<usize> = lists.iter().map(|l| l.len()).collect();
    let max_sum: usize = lens.iter().map(|n| n - 1).sum();
    let mut out = Vec::new();
    for sum in 0..=max_sum {
        if out.len() >= cap {
            break;
        }
        let mut level = Vec::new();
        tuples_with_sum(&lens, sum, &mut Vec::new(), &mut level);
        let mut level: Vec<Vec<&str>> = level
            .into_iter()
            .map(|t| t.iter().zip(&lists).map(|(&i, l)| l[i].uri.as_str()).collect())
            .collect();
        level.sort();
        for uris in level {
            if out.len() >= cap {
                break;
            }
            let assignment: Assignment = slots
                .iter()
                .cloned()
                .zip(uris.into_iter().map(str::to_string))
                .collect();
            out.push(template.instantiate(&assignment)?);
        }
    }
    Ok(out)
}

/// All index tuples `t` with `t[i] < lens[i]` and `Σ t = sum`.
fn tuples_with_sum(lens: &[usize], sum: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let Some((&n, rest)) = lens.split_first() else {
        if sum == 0 {
            out.push(prefix.clone());
        }
        return;
    };
    let rest_max: usize = rest.iter().map(|n| n - 1).sum();
    let lo = sum.saturating_sub(rest_max);
    let hi = sum.min(n - 1);
    for i in lo..=hi {
        prefix.push(i);
        tuples_with_sum(rest, sum - i, prefix, out);
        prefix.pop();
    }
}
