//! Embedded triple store: N-Triples loading, permutation indexes, pattern
//! matching and an executor for the supported query subset.

mod exec;
mod ntriples;
mod store;
mod term;

pub use exec::{ExecError, ResultSet};
pub use ntriples::{parse_line, SyntaxError};
pub use store::{Binding, Direction, IndexOrder, KbError, KbStore, LoadOptions};
pub use term::{
    is_absolute_iri, local_name, Literal, Pattern, PatternTerm, Term, Triple, TriplePattern,
    RDFS_LABEL, RDF_TYPE, XSD_BOOLEAN, XSD_DECIMAL, XSD_DOUBLE, XSD_INTEGER,
};
