//! Query subset: AST, parser, canonical renderer, slot instantiation and
//! candidate enumeration.

mod ast;
mod enumerate;
mod parser;

pub use ast::{
    Assignment, CountTarget, Feature, Form, FormKind, Location, Projection, SlotKey, SlotRole,
    SparqlError, SparqlQuery, SparqlTemplate, TemplatePattern, TemplateTerm, Unsupported,
};
pub use enumerate::enumerate_candidates;
pub use parser::parse;
