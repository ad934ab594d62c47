//! Grammars for LLM output.

use super::{AnswerType, Mention, TripleMention};

/// Every `<a, b, c>` group in `text`, in order, deduplicated. Groups that do
/// not split into exactly three non-empty fields are ignored.
pub fn parse_triplets(text: &str) -> Vec<TripleMention> {
    let mut out: Vec<TripleMention> = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        let after = &rest[open + 1..];
        let Some(close) = after.find('>') else { break };
        let inner = &after[..close];
        // A nested '<' means the previous '<' was stray; restart there.
        if let Some(nested) = inner.rfind('<') {
            rest = &after[nested..];
            continue;
        }
        rest = &after[close + 1..];
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 || parts.iter().any(|p| p.is_empty() || *p == "?") {
            continue;
        }
        let t = TripleMention {
            subject: Mention::parse(parts[0]),
            relation: Mention::parse(parts[1]),
            object: Mention::parse(parts[2]),
        };
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// `<count>`, `<select>` or `<yes or no>`, case-insensitive; the first label
/// found wins.
pub fn parse_answer_type(text: &str) -> Option<AnswerType> {
    let lower = text.to_lowercase();
    [
        ("<count>", AnswerType::Count),
        ("<select>", AnswerType::Select),
        ("<yes or no>", AnswerType::Boolean),
    ]
    .into_iter()
    .filter_map(|(label, t)| lower.find(label).map(|i| (i, t)))
    .min_by_key(|(i, _)| *i)
    .map(|(_, t)| t)
}

/// URIs listed one per line, with list markers and brackets stripped.
pub fn parse_uri_lines(text: &str) -> Vec<String> {
    text.lines()
        .flat_map(|l| l.split_whitespace())
        .map(|tok| {
            tok.trim_matches(|c: char| matches!(c, '<' | '>' | ',' | '"' | '\'' | '`' | '*' | '(' | ')' | '[' | ']'))
                .trim_end_matches('.')
                .to_string()
        })
        .filter(|t| t.contains("://"))
        .collect()
}

/// The query text in a reply: code fences and leading chatter removed,
/// starting at the first SELECT or ASK keyword.
pub fn extract_query(text: &str) -> Option<String> {
    let cleaned: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n");
    let upper = cleaned.to_ascii_uppercase();
    let at_word = |i: usize, k: &str| {
        let before = upper[..i].chars().next_back();
        let after = upper[i + k.len()..].chars().next();
        !before.is_some_and(|c| c.is_alphanumeric()) && !after.is_some_and(|c| c.is_alphanumeric())
    };
    let start = ["SELECT", "ASK"]
        .iter()
        .filter_map(|k| upper.match_indices(k).map(|(i, _)| i).find(|&i| at_word(i, k)))
        .min()?;
    Some(cleaned[start..].trim().to_string())
}

/// True/False (also yes/no) as the first word of the reply.
pub fn parse_boolean(text: &str) -> Option<bool> {
    let word: String = text
        .trim()
        .chars()
        .skip_while(|c| !c.is_alphabetic())
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "true" | "yes" => Some(true),
        "false" | "no" => Some(false),
        _ => None,
    }
}

/// Single-fact reply: first non-empty line, trimmed of punctuation.
pub fn parse_fact(text: &str) -> Option<String> {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty())?;
    let fact = line.trim_matches(|c: char| (c.is_ascii_punctuation() && c != '?' && c != '-') || c.is_whitespace());
    (!fact.is_empty()).then(|| fact.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_shots_parse() {
        let t = parse_triplets("<?city, foundeer, John Forbes>");
        assert_eq!(
            t,
            vec![TripleMention {
                subject: Mention::Variable("city".into()),
                relation: Mention::Explicit("foundeer".into()),
                object: Mention::Explicit("John Forbes".into()),
            }]
        );
        let t = parse_triplets("<?horse, participated in, ?race> <?horse, breeder, Jacques Van't Hart>");
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].subject, t[1].subject);
        assert_eq!(t[1].object, Mention::Explicit("Jacques Van't Hart".into()));
        let t = parse_triplets("Output: <camel, phylum, chordate>\n");
        assert_eq!(t[0].relation, Mention::Explicit("phylum".into()));
    }

    #[test]
    fn malformed_groups_ignored() {
        assert!(parse_triplets("<a, b>").is_empty());
        assert!(parse_triplets("no triples here").is_empty());
        assert_eq!(parse_triplets("a < b then <x, r, y>").len(), 1);
        assert_eq!(parse_triplets("<x, r, y> <x, r, y>").len(), 1);
    }

    #[test]
    fn answer_type_labels() {
        assert_eq!(parse_answer_type("<Count>"), Some(AnswerType::Count));
        assert_eq!(parse_answer_type("Type: <YES OR NO>"), Some(AnswerType::Boolean));
        assert_eq!(parse_answer_type("select"), None);
    }

    #[test]
    fn uri_lines() {
        assert_eq!(
            parse_uri_lines("1. <http://kb/a>\n- http://kb/b,\nnone"),
            vec!["http://kb/a", "http://kb/b"]
        );
    }

    #[test]
    fn query_extraction() {
        assert_eq!(
            extract_query("```sparql\nASK WHERE { <a> <b> <c> }\n```").as_deref(),
            Some("ASK WHERE { <a> <b> <c> }")
        );
        assert_eq!(extract_query("nothing"), None);
        assert_eq!(
            extract_query("I selected this: SELECT ?x WHERE { ?x <p> <o> }").as_deref(),
            Some("SELECT ?x WHERE { ?x <p> <o> }")
        );
    }

    #[test]
    fn booleans_and_facts() {
        assert_eq!(parse_boolean("True"), Some(true));
        assert_eq!(parse_boolean(" 'False'."), Some(false));
        assert_eq!(parse_boolean("maybe"), None);
        assert_eq!(parse_fact("\n Berlin.\n").as_deref(), Some("Berlin"));
        assert_eq!(parse_fact("  "), None);
    }
}
