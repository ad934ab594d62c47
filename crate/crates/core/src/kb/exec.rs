use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::store::{Binding, KbStore};
use super::term::{PatternTerm, Term};
use crate::sparql::{CountTarget, Feature, Form, Projection, SparqlQuery};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("unsupported query features: {}", list(.0))]
    Unsupported(Vec<Feature>),
    #[error("projected variable ?{0} does not occur in the query pattern")]
    UnboundVariable(String),
}

fn list(features: &[Feature]) -> String {
    features.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Result of executing a grounded query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ResultSet {
    Bindings {
        variables: Vec<String>,
        rows: Vec<Vec<Term>>,
    },
    Boolean {
        value: bool,
    },
    Count {
        value: u64,
    },
}

impl ResultSet {
    /// Rows as variable → value maps.
    pub fn binding_maps(&self) -> Vec<Binding> {
        match self {
            ResultSet::Bindings { variables, rows } => rows
                .iter()
                .map(|r| variables.iter().cloned().zip(r.iter().cloned()).collect())
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Whether the query retrieved something: non-empty rows, a positive
    /// count, or (for ASK) always.
    pub fn is_productive(&self) -> bool {
        match self {
            ResultSet::Bindings { rows, .. } => !rows.is_empty(),
            ResultSet::Boolean { .. } => true,
            ResultSet::Count { value } => *value > 0,
        }
    }
}

type Row = Vec<Option<u32>>;

impl KbStore {
    /// Evaluates the basic graph pattern by successive joins, then applies the
    /// query form.
    pub fn execute(&self, query: &SparqlQuery) -> Result<ResultSet, ExecError> {
        if !query.unsupported.is_empty() {
            let features: BTreeSet<Feature> = query.unsupported.iter().map(|u| u.feature).collect();
            return Err(ExecError::Unsupported(features.into_iter().collect()));
        }
        let mut vars: Vec<&str> = Vec::new();
        for p in &query.patterns {
            for v in p.variables() {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
        }
        let slot = |v: &str| vars.iter().position(|x| *x == v);
        let check = |v: &str| slot(v).ok_or_else(|| ExecError::UnboundVariable(v.to_string()));

        let solutions = self.solve(query, &vars);
        match &query.form {
            Form::Ask => Ok(ResultSet::Boolean {
                value: !solutions.is_empty(),
            }),
            Form::Count {
                distinct, target, ..
            } => {
                let value = match target {
                    CountTarget::All => solutions.len(),
                    CountTarget::Var(v) => {
                        let i = check(v)?;
                        if *distinct {
                            solutions.iter().map(|r| r[i]).collect::<BTreeSet<_>>().len()
                        } else {
                            solutions.len()
                        }
                    }
                };
                Ok(ResultSet::Count {
                    value: value as u64,
                })
            }
            Form::Select {
                distinct,
                projection,
            } => {
                let projected: Vec<&str> = match projection {
                    Projection::All => vars.clone(),
                    Projection::Vars(vs) => vs.iter().map(String::as_str).collect(),
                };
                let idx = projected
                    .iter()
                    .map(|v| check(v))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut rows: Vec<Vec<u32>> = solutions
                    .iter()
                    .map(|r| idx.iter().map(|&i| r[i].expect("joined rows are total")).collect())
                    .collect();
                rows.sort();
                if *distinct {
                    rows.dedup();
                }
                Ok(ResultSet::Bindings {
                    variables: projected.iter().map(|v| v.to_string()).collect(),
                    rows: rows
                        .into_iter()
                        .map(|r| r.into_iter().map(|id| self.term(id).clone()).collect())
                        .collect(),
                })
            }
        }
    }

    /// All solutions of the pattern list, as rows aligned with `vars`.
    fn solve(&self, query: &SparqlQuery, vars: &[&str]) -> Vec<Row> {
        let slot = |v: &str| vars.iter().position(|x| *x == v).expect("collected variable");
        // Constants unknown to the store can never match.
        let mut encoded = Vec::with_capacity(query.patterns.len());
        for p in &query.patterns {
            let mut pos = [Enc::Var(0); 3];
            for (i, t) in p.positions().into_iter().enumerate() {
                pos[i] = match t {
                    PatternTerm::Var(v) => Enc::Var(slot(v)),
                    PatternTerm::Const(c) => match self.id(c) {
                        Some(id) => Enc::Id(id),
                        None => return Vec::new(),
                    },
                };
            }
            encoded.push(pos);
        }

        let mut rows: Vec<Row> = vec![vec![None; vars.len()]];
        let mut bound = vec![false; vars.len()];
        let mut pending: Vec<usize> = (0..encoded.len()).collect();
        while !pending.is_empty() && !rows.is_empty() {
            // Most bound positions first; earliest pattern on ties.
            let (at, _) = pending
                .iter()
                .enumerate()
                .map(|(at, &pi)| {
                    let n = encoded[pi]
                        .iter()
                        .filter(|e| match e {
                            Enc::Id(_) => true,
                            Enc::Var(v) => bound[*v],
                        })
                        .count();
                    (at, n)
                })
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .expect("pending is non-empty");
            let pat = encoded[pending.remove(at)];
            let mut next = Vec::new();
            for row in &rows {
                let key = pat.map(|e| match e {
                    Enc::Id(id) => Some(id),
                    Enc::Var(v) => row[v],
                });
                'triples: for spo in self.scan_auto(key) {
                    let mut r = row.clone();
                    for i in 0..3 {
                        if let Enc::Var(v) = pat[i] {
                            match r[v] {
                                Some(prev) if prev != spo[i] => continue 'triples,
                                _ => r[v] = Some(spo[i]),
                            }
                        }
                    }
                    next.push(r);
                }
            }
            for e in pat {
                if let Enc::Var(v) = e {
                    bound[v] = true;
                }
            }
            rows = next;
        }
        rows
    }
}

#[derive(Debug, Clone, Copy)]
enum Enc {
    Id(u32),
    Var(usize),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::LoadOptions;

    const KB: &str = "\
<http://ex.org/a> <http://ex.org/p> <http://ex.org/b> .
<http://ex.org/a> <http://ex.org/p> <http://ex.org/c> .
<http://ex.org/b> <http://ex.org/q> <http://ex.org/c> .
<http://ex.org/c> <http://ex.org/q> <http://ex.org/c> .
<http://ex.org/d> <http://ex.org/p> <http://ex.org/c> .
";

    fn store() -> KbStore {
        KbStore::from_reader(KB.as_bytes(), &LoadOptions::default()).unwrap()
    }

    fn run(q: &str) -> Result<ResultSet, ExecError> {
        store().execute(&SparqlQuery::parse(q).unwrap())
    }

    #[test]
    fn ask_membership() {
        assert_eq!(
            run("ASK { <http://ex.org/a> <http://ex.org/p> <http://ex.org/b> }").unwrap(),
            ResultSet::Boolean { value: true }
        );
        assert_eq!(
            run("ASK { <http://ex.org/b> <http://ex.org/p> <http://ex.org/a> }").unwrap(),
            ResultSet::Boolean { value: false }
        );
    }

    #[test]
    fn distinct_removes_duplicates() {
        let plain = run("SELECT ?s WHERE { ?s <http://ex.org/p> ?o }").unwrap();
        let distinct = run("SELECT DISTINCT ?s WHERE { ?s <http://ex.org/p> ?o }").unwrap();
        let n = |r: &ResultSet| match r {
            ResultSet::Bindings { rows, .. } => rows.len(),
            _ => unreachable!(),
        };
        assert_eq!(n(&plain), 3);
        assert_eq!(n(&distinct), 2);
    }

    #[test]
    fn count_join_matches_nested_loop() {
        let s = store();
        let triples: Vec<_> = s.triples().collect();
        // ?x p ?y . ?y q ?z
        let mut expected = 0;
        for t1 in &triples {
            for t2 in &triples {
                if t1.predicate == Term::iri("http://ex.org/p")
                    && t2.predicate == Term::iri("http://ex.org/q")
                    && t1.object == t2.subject
                {
                    expected += 1;
                }
            }
        }
        let got = run(
            "SELECT (COUNT(*) AS ?n) WHERE { ?x <http://ex.org/p> ?y . ?y <http://ex.org/q> ?z }",
        )
        .unwrap();
        assert_eq!(got, ResultSet::Count { value: expected });
        assert_eq!(expected, 3);
    }

    #[test]
    fn count_distinct_target() {
        let got = run("SELECT (COUNT(DISTINCT ?x) AS ?n) WHERE { ?x <http://ex.org/p> ?y }").unwrap();
        assert_eq!(got, ResultSet::Count { value: 2 });
    }

    #[test]
    fn unsupported_is_rejected() {
        let e = run("SELECT ?x WHERE { ?x <http://ex.org/p> ?y FILTER(?y != ?x) }").unwrap_err();
        assert_eq!(e, ExecError::Unsupported(vec![Feature::Filter]));
        let e = run("SELECT ?x WHERE { ?x <http://ex.org/p> ?y } LIMIT 1").unwrap_err();
        assert_eq!(e, ExecError::Unsupported(vec![Feature::Limit]));
    }

    #[test]
    fn unbound_projection_is_an_error() {
        let mut q = SparqlQuery::parse("SELECT ?x WHERE { ?x <http://ex.org/p> ?y }").unwrap();
        q.form = Form::Select {
            distinct: false,
            projection: Projection::Vars(vec!["zz".into()]),
        };
        assert_eq!(store().execute(&q).unwrap_err(), ExecError::UnboundVariable("zz".into()));
    }

    #[test]
    fn repeated_variable_in_pattern() {
        let got = run("SELECT ?x WHERE { ?x <http://ex.org/q> ?x }").unwrap();
        assert_eq!(
            got,
            ResultSet::Bindings {
                variables: vec!["x".into()],
                rows: vec![vec![Term::iri("http://ex.org/c")]],
            }
        );
    }

    #[test]
    fn unknown_constant_yields_nothing() {
        let got = run("SELECT ?x WHERE { ?x <http://ex.org/nope> ?y }").unwrap();
        assert!(!got.is_productive());
    }
}
