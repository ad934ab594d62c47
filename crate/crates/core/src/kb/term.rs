use std::fmt;

use serde::{Deserialize, Serialize};

/// An RDF term as stored in the knowledge base.
///
/// Ordering is lexicographic (IRIs before literals, then by text), which is
/// the order every query result is reported in.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Iri(String),
    Literal(Literal),
}

/// A literal with its lexical form and an opaque tag suffix
/// (`@en` or `^^<datatype>`), kept verbatim and never interpreted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub lexical: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
pub const XSD_DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";
pub const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";
pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";

impl Term {
    pub fn iri(s: impl Into<String>) -> Self {
        Term::Iri(s.into())
    }

    pub fn literal(s: impl Into<String>) -> Self {
        Term::Literal(Literal {
            lexical: s.into(),
            tag: None,
        })
    }

    pub fn lang_literal(s: impl Into<String>, lang: &str) -> Self {
        Term::Literal(Literal {
            lexical: s.into(),
            tag: Some(format!("@{lang}")),
        })
    }

    pub fn typed_literal(s: impl Into<String>, datatype: &str) -> Self {
        Term::Literal(Literal {
            lexical: s.into(),
            tag: Some(format!("^^<{datatype}>")),
        })
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(s) => Some(s),
            Term::Literal(_) => None,
        }
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    /// The plain string value: the IRI itself, or the literal's lexical form.
    pub fn value(&self) -> &str {
        match self {
            Term::Iri(s) => s,
            Term::Literal(l) => &l.lexical,
        }
    }
}

/// Writes the term in N-Triples / SPARQL surface syntax.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write!(f, "<{iri}>"),
            Term::Literal(lit) => {
                f.write_str("\"")?;
                for c in lit.lexical.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")?;
                if let Some(tag) = &lit.tag {
                    f.write_str(tag)?;
                }
                Ok(())
            }
        }
    }
}

/// True when `s` looks like an absolute IRI: a scheme followed by ':'.
pub fn is_absolute_iri(s: &str) -> bool {
    let Some((scheme, rest)) = s.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    let first_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic());
    first_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
        && !rest.is_empty()
        && !s.chars().any(|c| c.is_whitespace() || matches!(c, '<' | '>' | '"'))
}

/// Label fallback derived from an IRI: the text after the last '/' or '#',
/// with underscores turned into spaces.
pub fn local_name(iri: &str) -> String {
    let tail = iri
        .rfind(['/', '#'])
        .map(|i| &iri[i + 1..])
        .unwrap_or(iri);
    tail.replace('_', " ")
}

/// One position of a triple pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternTerm {
    Var(String),
    Const(Term),
}

impl PatternTerm {
    pub fn var(name: impl Into<String>) -> Self {
        PatternTerm::Var(name.into())
    }

    pub fn iri(s: impl Into<String>) -> Self {
        PatternTerm::Const(Term::iri(s))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            PatternTerm::Var(v) => Some(v),
            PatternTerm::Const(_) => None,
        }
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => write!(f, "?{v}"),
            PatternTerm::Const(t) => t.fmt(f),
        }
    }
}

/// A subject/predicate/object triple of arbitrary position type. Stored
/// triples, query patterns and template patterns all share this shape.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pattern<T> {
    pub subject: T,
    pub predicate: T,
    pub object: T,
}

impl<T> Pattern<T> {
    pub fn new(subject: T, predicate: T, object: T) -> Self {
        Self {
            subject,
            predicate,
            object,
        }
    }

    pub fn positions(&self) -> [&T; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Pattern<U> {
        Pattern {
            subject: f(&self.subject),
            predicate: f(&self.predicate),
            object: f(&self.object),
        }
    }
}

pub type Triple = Pattern<Term>;
pub type TriplePattern = Pattern<PatternTerm>;

impl TriplePattern {
    /// Variables in order of first appearance (subject, predicate, object).
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for p in self.positions() {
            if let PatternTerm::Var(v) = p {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
        }
        out
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}
