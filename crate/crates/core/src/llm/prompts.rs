//! The eight subtask prompts and their `{{var}}` renderer.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    Triplet,
    Template,
    Classify,
    EntitySelect,
    RelationSelect,
    QuerySelect,
    AnswerBoolean,
    AnswerFact,
}

impl TemplateId {
    pub const ALL: [TemplateId; 8] = [
        TemplateId::Triplet,
        TemplateId::Template,
        TemplateId::Classify,
        TemplateId::EntitySelect,
        TemplateId::RelationSelect,
        TemplateId::QuerySelect,
        TemplateId::AnswerBoolean,
        TemplateId::AnswerFact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Triplet => "triplet",
            TemplateId::Template => "template",
            TemplateId::Classify => "classify",
            TemplateId::EntitySelect => "entity-select",
            TemplateId::RelationSelect => "relation-select",
            TemplateId::QuerySelect => "query-select",
            TemplateId::AnswerBoolean => "answer-boolean",
            TemplateId::AnswerFact => "answer-fact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("prompt {template}: missing variable {{{{{name}}}}}")]
    MissingVariable { template: TemplateId, name: String },
    #[error("prompt {template}: {requested} shots requested but only {available} available")]
    TooManyShots {
        template: TemplateId,
        requested: usize,
        available: usize,
    },
}

/// Instruction, examples, optional reasoning hint and a body with
/// `{{var}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub instruction: String,
    pub shots: Vec<String>,
    pub cot: String,
    pub body: String,
}

pub type Vars = BTreeMap<String, String>;

pub const EXAMPLES_HEADER: &str = "Here are some examples:";

/// Appended to a prompt whose answer could not be parsed.
pub const REASK_SUFFIX: &str =
    "\n\nYour previous output did not follow the required format. Answer again, strictly following the guidelines.";

impl PromptTemplate {
    /// Placeholder names in instruction and body, in order of first use.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        for part in [&self.instruction, &self.body] {
            let mut rest = part.as_str();
            while let Some(i) = rest.find("{{") {
                let after = &rest[i + 2..];
                let Some(j) = after.find("}}") else { break };
                let name = after[..j].to_string();
                if !out.contains(&name) {
                    out.push(name);
                }
                rest = &after[j + 2..];
            }
        }
        out
    }

    pub fn render(&self, vars: &Vars, n_shots: usize) -> Result<String, PromptError> {
        if n_shots > self.shots.len() {
            return Err(PromptError::TooManyShots {
                template: self.id,
                requested: n_shots,
                available: self.shots.len(),
            });
        }
        let mut out = fill(self.id, &self.instruction, vars)?;
        if n_shots > 0 {
            out.push_str("\n\n");
            out.push_str(EXAMPLES_HEADER);
            for shot in &self.shots[..n_shots] {
                out.push('\n');
                out.push_str(shot);
            }
        }
        if !self.cot.is_empty() {
            out.push_str("\n\n");
            out.push_str(&self.cot);
        }
        out.push_str("\n\n");
        out.push_str(&fill(self.id, &self.body, vars)?);
        Ok(out)
    }
}

/// Single pass substitution: substituted values are never rescanned.
fn fill(id: TemplateId, text: &str, vars: &Vars) -> Result<String, PromptError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find("{{") {
        out.push_str(&rest[..i]);
        let after = &rest[i + 2..];
        let Some(j) = after.find("}}") else {
            out.push_str(&rest[i..]);
            return Ok(out);
        };
        let name = &after[..j];
        let value = vars.get(name).ok_or_else(|| PromptError::MissingVariable {
            template: id,
            name: name.to_string(),
        })?;
        out.push_str(value);
        rest = &after[j + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

const TRIPLET_INSTRUCTION: &str = "\
You are an assistant to identify triples within a provided sentence. Please adhere to the following guidelines:

1. Triples should be structured in the format <entity1, relation, entity2>.
2. The sentence must contain at least one triple, so you should provide at least one.
3. Entities should represent the smallest semantic units and should not contain descriptive details.
4. Entities can take the form of explicit or implicit references. Explicit entities refer to specific named resources, whereas implicit entities are less certain.
5. When an entity is implicit, utilize a variable format such as '?variable' to denote it, for example, '?location' or '?person'.";

const TRIPLET_SHOTS: [&str; 3] = [
    "Which city's founder is John Forbes? : <?city, foundeer, John Forbes>",
    "How many races have the horses bred by Jacques Van't Hart participated in? : <?horse, participated in, ?race> <?horse, breeder, Jacques Van't Hart>",
    "Is camel of the chordate phylum? : <camel, phylum, chordate>",
];

const TEMPLATE_INSTRUCTION: &str = "\
You are an assistant to generate a SPARQL query to address a specific question. Here are the guidelines to follow:

1. Ensure that the resulting SPARQL query is designed to answer the provided question.
2. Adhere to the commonly accepted SPARQL standards when generating the query.
3. Make an effort to leverage the information provided to assist in the creation of the SPARQL query.
4. Strive to keep the generated SPARQL query as straightforward as possible.
5. Avoid including 'PREFIX' or ':' in the SPARQL query.
6. Enclose condition entities and predicates within angle brackets, such as <entity> or <predicate>.
7. Maintain the original order of the given triples without altering their sequence.";

const TEMPLATE_SHOTS: [&str; 3] = [
    "Question: Which city's founder is John Forbes?\nTriplets: <?city, founder, John Forbes>\nOutput: SELECT DISTINCT ?city WHERE { ?city <founder> <John Forbes> . }",
    "Question: How many races have the horses bred by Jacques Van't Hart participated in?\nTriplets: <?horse, participated in, ?race> <?horse, breeder, Jacques Van't Hart>\nOutput: SELECT (COUNT(DISTINCT ?race) AS ?count) WHERE { ?horse <participated in> ?race . ?horse <breeder> <Jacques Van't Hart> . }",
    "Question: Is camel of the chordate phylum?\nTriplets: <camel, phylum, chordate>\nOutput: ASK WHERE { <camel> <phylum> <chordate> . }",
];

const CLASSIFY_INSTRUCTION: &str = "\
You are an assistant to determine the specific type of a given question according to the following guidelines:

1. You must determine the most probable question type for the input question.
2. The type of question should be enclosed within angle brackets, denoted as '<' and '>'.
3. Possible question types include: <count>, <select>, and <yes or no>.";

const CLASSIFY_SHOTS: [&str; 3] = [
    "Question: How many races have the horses bred by Jacques Van't Hart participated in?\nOutput: <count>",
    "Question: Which city's founder is John Forbes?\nOutput: <select>",
    "Question: Is camel of the chordate phylum?\nOutput: <yes or no>",
];

const ENTITY_SELECT_INSTRUCTION: &str = "\
You are an assistant to select {{k}} URIs from a provided list of possible URIs for a specified entity, following these guidelines:

1. Identify the {{k}} most appropriate URIs from the given list that best represent the entity in question.
2. Seek to understand the semantic information associated with the specified entity by examining the provided question.
3. The output should consist of {{k}} URIs chosen from the provided list of possible URIs.
4. Simply output these {{k}} target URIs, each on a separate line, without providing any additional explanations.";

const RELATION_SELECT_INSTRUCTION: &str = "\
You are an assistant tasked with selecting the {{k}} relation URIs between entities mentioned in a sentence. Here are the guidelines:

1. The two entities are listed one after the other, without a specific order.
2. Use the provided sentence to discern the semantic meaning of these entities.
3. The potential relation URIs are listed one by one.
4. Your output should consist of a maximum of {{k}} possible relation URIs, although you may also output fewer if appropriate.
5. Ensure that your output is organized, prioritizing the most likely relationship first.
6. Provide a list of no more than {{k}} relation URIs (each on a separate line if there are multiple) without any additional descriptions.";

const QUERY_SELECT_INSTRUCTION: &str = "\
You are an assistant to select an appropriate SPARQL query from the provided list in order to respond to a specific question. Please adhere to the following guidelines:

1. Select the most suitable SPARQL query from the given query list to address the question.
2. Select a SPARQL query solely from the provided list; avoid crafting your own SPARQL query.
3. The selected SPARQL query must be applicable to answer the given question.";

const ANSWER_BOOLEAN_INSTRUCTION: &str = "\
You are an assistant to answer a yes-or-no question. Please adhere to the following guidelines:

1. If you believe that the answer is yes, provide an output of 'True'. If not, provide an output of 'False'.
2. Please do not include additional information or explanations in your response.";

const ANSWER_FACT_INSTRUCTION: &str = "\
You are an assistant to answer a question. Please adhere to the following guidelines:

1. The answer to the question is a single entity.
2. You should just output the full expression of the answer without any punctuation.
3. Do not output any other description.";

fn template(id: TemplateId, instruction: &str, shots: &[&str], body: &str) -> PromptTemplate {
    PromptTemplate {
        id,
        instruction: instruction.to_string(),
        shots: shots.iter().map(|s| s.to_string()).collect(),
        cot: String::new(),
        body: body.to_string(),
    }
}

/// The built-in prompt for `id`.
pub fn builtin(id: TemplateId) -> PromptTemplate {
    match id {
        TemplateId::Triplet => template(
            id,
            TRIPLET_INSTRUCTION,
            &TRIPLET_SHOTS,
            "Sentence: {{question}}\nOutput:",
        ),
        TemplateId::Template => template(
            id,
            TEMPLATE_INSTRUCTION,
            &TEMPLATE_SHOTS,
            "Question: {{question}}\nTriplets: {{triplets}}\nOutput:",
        ),
        TemplateId::Classify => template(
            id,
            CLASSIFY_INSTRUCTION,
            &CLASSIFY_SHOTS,
            "Question: {{question}}\nOutput:",
        ),
        TemplateId::EntitySelect => template(
            id,
            ENTITY_SELECT_INSTRUCTION,
            &[],
            "Sentence: {{question}}\nEntity: {{entity}}\nPossible entity URIs: {{uris}}\nOutput:",
        ),
        TemplateId::RelationSelect => template(
            id,
            RELATION_SELECT_INSTRUCTION,
            &[],
            "Sentence: {{question}}\nEntities: {{entities}}\nPossible relation URIs: {{uris}}\nOutput:",
        ),
        TemplateId::QuerySelect => template(
            id,
            QUERY_SELECT_INSTRUCTION,
            &[],
            "Sentence: {{question}}\nSPARQL candidates: {{queries}}\nOutput:",
        ),
        TemplateId::AnswerBoolean => template(
            id,
            ANSWER_BOOLEAN_INSTRUCTION,
            &[],
            "Sentence: {{question}}\nOutput:",
        ),
        TemplateId::AnswerFact => template(
            id,
            ANSWER_FACT_INSTRUCTION,
            &[],
            "Sentence: {{question}}\nOutput:",
        ),
    }
}

/// Collapses every whitespace run to one space and trims.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&str, &str)]) -> Vars {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn triplet_three_shots_contains_examples_and_question() {
        let t = builtin(TemplateId::Triplet);
        let q = "Is camel of the chordate phylum?";
        let out = t.render(&vars(&[("question", q)]), 3).unwrap();
        for shot in TRIPLET_SHOTS {
            assert!(out.contains(shot));
        }
        assert!(out.ends_with(&format!("Sentence: {q}\nOutput:")));
    }

    #[test]
    fn zero_shots_is_instruction_and_body() {
        let t = builtin(TemplateId::Triplet);
        let out = t.render(&vars(&[("question", "Q?")]), 0).unwrap();
        assert_eq!(out, format!("{TRIPLET_INSTRUCTION}\n\nSentence: Q?\nOutput:"));
        assert!(!out.contains(EXAMPLES_HEADER));
    }

    #[test]
    fn entity_select_fills_k() {
        let t = builtin(TemplateId::EntitySelect);
        let out = t
            .render(&vars(&[("k", "2"), ("question", "Q"), ("entity", "e"), ("uris", "u")]), 0)
            .unwrap();
        assert!(out.contains("select 2 URIs"));
        assert!(!out.contains("{{"));
    }

    #[test]
    fn missing_variable_is_named() {
        let t = builtin(TemplateId::EntitySelect);
        let e = t.render(&vars(&[("question", "Q")]), 0).unwrap_err();
        assert_eq!(
            e,
            PromptError::MissingVariable {
                template: TemplateId::EntitySelect,
                name: "k".into()
            }
        );
    }

    #[test]
    fn too_many_shots() {
        let t = builtin(TemplateId::QuerySelect);
        assert!(matches!(
            t.render(&Vars::new(), 1),
            Err(PromptError::TooManyShots { available: 0, .. })
        ));
    }

    #[test]
    fn values_are_not_rescanned() {
        let t = builtin(TemplateId::AnswerFact);
        let out = t.render(&vars(&[("question", "{{question}}")]), 0).unwrap();
        assert!(out.ends_with("Sentence: {{question}}\nOutput:"));
    }

    #[test]
    fn variables_listed() {
        assert_eq!(
            builtin(TemplateId::RelationSelect).variables(),
            vec!["k", "question", "entities", "uris"]
        );
    }

    #[test]
    fn ids_round_trip() {
        for id in TemplateId::ALL {
            assert_eq!(TemplateId::parse(id.as_str()), Some(id));
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{}\"", id.as_str()));
        }
    }
}
