use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Display, Write as _};

use serde::{Deserialize, Serialize};

use crate::kb::{Pattern, PatternTerm, Term, TriplePattern};

/// A template position: variable, constant, or a mention slot awaiting a URI.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateTerm {
    Var(String),
    Const(Term),
    Slot(String),
}

impl Display for TemplateTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateTerm::Var(v) => write!(f, "?{v}"),
            TemplateTerm::Const(t) => t.fmt(f),
            TemplateTerm::Slot(s) => write!(f, "<{s}>"),
        }
    }
}

pub type TemplatePattern = Pattern<TemplateTerm>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotRole {
    Entity,
    Relation,
}

/// A slot is identified by its role (predicate position or not) and its text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotKey {
    pub role: SlotRole,
    pub text: String,
}

impl SlotKey {
    pub fn entity(text: impl Into<String>) -> Self {
        Self {
            role: SlotRole::Entity,
            text: text.into(),
        }
    }

    pub fn relation(text: impl Into<String>) -> Self {
        Self {
            role: SlotRole::Relation,
            text: text.into(),
        }
    }
}

impl Display for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = match self.role {
            SlotRole::Entity => "entity",
            SlotRole::Relation => "relation",
        };
        write!(f, "{role} <{}>", self.text)
    }
}

/// Slot → URI map recording how a template was grounded.
pub type Assignment = BTreeMap<SlotKey, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    All,
    Vars(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountTarget {
    All,
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Select {
        distinct: bool,
        projection: Projection,
    },
    Ask,
    Count {
        distinct: bool,
        target: CountTarget,
        alias: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    Select,
    Ask,
    Count,
}

impl Form {
    pub fn kind(&self) -> FormKind {
        match self {
            Form::Select { .. } => FormKind::Select,
            Form::Ask => FormKind::Ask,
            Form::Count { .. } => FormKind::Count,
        }
    }
}

/// Constructs outside the executable subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Aggregate,
    Filter,
    Optional,
    Union,
    Minus,
    Bind,
    Values,
    Service,
    Graph,
    GroupBy,
    Having,
    OrderBy,
    Limit,
    Offset,
}

impl Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Feature::Aggregate => "aggregate projection",
            Feature::Filter => "FILTER",
            Feature::Optional => "OPTIONAL",
            Feature::Union => "UNION / nested group",
            Feature::Minus => "MINUS",
            Feature::Bind => "BIND",
            Feature::Values => "VALUES",
            Feature::Service => "SERVICE",
            Feature::Graph => "GRAPH",
            Feature::GroupBy => "GROUP BY",
            Feature::Having => "HAVING",
            Feature::OrderBy => "ORDER BY",
            Feature::Limit => "LIMIT",
            Feature::Offset => "OFFSET",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Projection,
    Where,
    Modifier,
}

/// A parsed-but-unsupported construct, kept verbatim (whitespace-collapsed)
/// so rendering never drops it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unsupported {
    pub feature: Feature,
    pub location: Location,
    pub text: String,
}

/// Query skeleton as produced by the template generator. Equality ignores `raw`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparqlTemplate {
    pub form: Form,
    pub patterns: Vec<TemplatePattern>,
    pub unsupported: Vec<Unsupported>,
    pub raw: String,
}

impl PartialEq for SparqlTemplate {
    fn eq(&self, other: &Self) -> bool {
        self.form == other.form
            && self.patterns == other.patterns
            && self.unsupported == other.unsupported
    }
}

impl Eq for SparqlTemplate {}

/// A fully grounded query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparqlQuery {
    pub form: Form,
    pub patterns: Vec<TriplePattern>,
    pub unsupported: Vec<Unsupported>,
    pub assignment: Assignment,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SparqlError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("assignment does not cover slots: {}", join(.0))]
    MissingSlots(Vec<SlotKey>),
    #[error("no candidates for slot {0}")]
    StarvedSlot(SlotKey),
    #[error("query still contains slots: {}", join(.0))]
    NotGrounded(Vec<SlotKey>),
}

fn join(keys: &[SlotKey]) -> String {
    keys.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn slot_role(position: usize) -> SlotRole {
    if position == 1 {
        SlotRole::Relation
    } else {
        SlotRole::Entity
    }
}

impl SparqlTemplate {
    /// Distinct slots, keyed by role and text.
    pub fn slots(&self) -> BTreeSet<SlotKey> {
        let mut out = BTreeSet::new();
        for p in &self.patterns {
            for (i, t) in p.positions().into_iter().enumerate() {
                if let TemplateTerm::Slot(s) = t {
                    out.insert(SlotKey {
                        role: slot_role(i),
                        text: s.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        self.patterns
            .iter()
            .flat_map(|p| p.positions())
            .filter_map(|t| match t {
                TemplateTerm::Var(v) => Some(v.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Substitutes every slot with its assigned URI.
    pub fn instantiate(&self, assignment: &Assignment) -> Result<SparqlQuery, SparqlError> {
        let missing: Vec<SlotKey> = self
            .slots()
            .into_iter()
            .filter(|k| !assignment.contains_key(k))
            .collect();
        if !missing.is_empty() {
            return Err(SparqlError::MissingSlots(missing));
        }
        let patterns = self
            .patterns
            .iter()
            .map(|p| {
                let mut i = 0;
                p.map(|t| {
                    let role = slot_role(i);
                    i += 1;
                    match t {
                        TemplateTerm::Var(v) => PatternTerm::Var(v.clone()),
                        TemplateTerm::Const(c) => PatternTerm::Const(c.clone()),
                        TemplateTerm::Slot(s) => {
                            let key = SlotKey {
                                role,
                                text: s.clone(),
                            };
                            PatternTerm::Const(Term::Iri(assignment[&key].clone()))
                        }
                    }
                })
            })
            .collect();
        let used = self.slots();
        Ok(SparqlQuery {
            form: self.form.clone(),
            patterns,
            unsupported: self.unsupported.clone(),
            assignment: assignment
                .iter()
                .filter(|(k, _)| used.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        })
    }

    pub fn render(&self) -> String {
        render(&self.form, &self.patterns, &self.unsupported)
    }
}

impl SparqlQuery {
    /// Parses text that must not contain any slot.
    pub fn parse(text: &str) -> Result<Self, SparqlError> {
        let template = super::parse(text)?;
        let slots: Vec<SlotKey> = template.slots().into_iter().collect();
        if !slots.is_empty() {
            return Err(SparqlError::NotGrounded(slots));
        }
        template.instantiate(&Assignment::new())
    }

    pub fn render(&self) -> String {
        render(&self.form, &self.patterns, &self.unsupported)
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        self.patterns.iter().flat_map(|p| p.variables()).collect()
    }
}

impl Display for SparqlTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Display for SparqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Canonical single-line form shared by templates and grounded queries.
fn render<T: Display>(form: &Form, patterns: &[Pattern<T>], unsupported: &[Unsupported]) -> String {
    let at = |loc: Location| unsupported.iter().filter(move |u| u.location == loc);
    let mut out = String::new();
    match form {
        Form::Select {
            distinct,
            projection,
        } => {
            out.push_str("SELECT");
            if *distinct {
                out.push_str(" DISTINCT");
            }
            match projection {
                Projection::All => out.push_str(" *"),
                Projection::Vars(vars) => {
                    for v in vars {
                        let _ = write!(out, " ?{v}");
                    }
                }
            }
            for u in at(Location::Projection) {
                let _ = write!(out, " {}", u.text);
            }
        }
        Form::Ask => out.push_str("ASK"),
        Form::Count {
            distinct,
            target,
            alias,
        } => {
            let mut inner = String::from("COUNT(");
            if *distinct {
                inner.push_str("DISTINCT ");
            }
            match target {
                CountTarget::All => inner.push('*'),
                CountTarget::Var(v) => {
                    let _ = write!(inner, "?{v}");
                }
            }
            inner.push(')');
            match alias {
                Some(a) => {
                    let _ = write!(out, "SELECT ({inner} AS ?{a})");
                }
                None => {
                    let _ = write!(out, "SELECT {inner}");
                }
            }
        }
    }
    out.push_str(" WHERE { ");
    for p in patterns {
        let _ = write!(out, "{} {} {} . ", p.subject, p.predicate, p.object);
    }
    for u in at(Location::Where) {
        let _ = write!(out, "{} ", u.text);
    }
    out.push('}');
    for u in at(Location::Modifier) {
        let _ = write!(out, " {}", u.text);
    }
    out
}
