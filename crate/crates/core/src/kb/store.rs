use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ntriples::parse_line;
use super::term::{local_name, PatternTerm, Term, Triple, TriplePattern, RDFS_LABEL};

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}, column {column}: {message}: {text}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Strict mode fails on the first malformed line; lenient mode skips and counts.
    pub strict: bool,
    pub label_predicates: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            strict: true,
            label_predicates: vec![RDFS_LABEL.to_string()],
        }
    }
}

/// Which permutation index drives a pattern scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexOrder {
    Spo,
    Pos,
    Osp,
}

impl IndexOrder {
    pub const ALL: [IndexOrder; 3] = [IndexOrder::Spo, IndexOrder::Pos, IndexOrder::Osp];

    /// Triple positions in key order.
    fn perm(self) -> [usize; 3] {
        match self {
            IndexOrder::Spo => [0, 1, 2],
            IndexOrder::Pos => [1, 2, 0],
            IndexOrder::Osp => [2, 0, 1],
        }
    }

    /// Picks the index whose key prefix covers the most bound positions.
    fn for_bound(bound: [bool; 3]) -> Self {
        match bound {
            [true, _, false] | [true, true, true] | [false, false, false] => IndexOrder::Spo,
            [false, true, _] => IndexOrder::Pos,
            [_, false, true] => IndexOrder::Osp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Outgoing,
    Incoming,
}

pub type Binding = BTreeMap<String, Term>;

/// Read-only knowledge graph with three permutation indexes.
///
/// Terms are interned in lexicographic order, so index order and term order
/// agree and every scan yields results already sorted by value.
#[derive(Debug, Clone, Default)]
pub struct KbStore {
    terms: Vec<Term>,
    ids: HashMap<Term, u32>,
    spo: BTreeSet<[u32; 3]>,
    pos: BTreeSet<[u32; 3]>,
    osp: BTreeSet<[u32; 3]>,
    predicates: BTreeSet<u32>,
    labels: BTreeMap<String, BTreeSet<String>>,
    skipped: usize,
}

impl KbStore {
    pub fn load(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Self, KbError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| KbError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(BufReader::new(file), opts).map_err(|e| match e {
            KbError::Io { source, .. } => KbError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    pub fn from_reader(reader: impl BufRead, opts: &LoadOptions) -> Result<Self, KbError> {
        let mut triples = Vec::new();
        let mut skipped = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| KbError::Io {
                path: PathBuf::new(),
                source,
            })?;
            match parse_line(&line) {
                Ok(Some(t)) => triples.push(t),
                Ok(None) => {}
                Err(e) if opts.strict => {
                    return Err(KbError::Syntax {
                        line: i + 1,
                        column: e.column,
                        message: e.message,
                        text: line,
                    })
                }
                Err(e) => {
                    log::debug!("skipping line {}: {}", i + 1, e.message);
                    skipped += 1;
                }
            }
        }
        let mut store = Self::from_triples(triples, &opts.label_predicates);
        store.skipped = skipped;
        Ok(store)
    }

    pub fn from_triples(
        triples: impl IntoIterator<Item = Triple>,
        label_predicates: &[String],
    ) -> Self {
        let triples: BTreeSet<Triple> = triples.into_iter().collect();
        let mut vocab: BTreeSet<&Term> = BTreeSet::new();
        for t in &triples {
            vocab.extend(t.positions());
        }
        let terms: Vec<Term> = vocab.into_iter().cloned().collect();
        let ids: HashMap<Term, u32> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        let mut store = KbStore {
            terms,
            ids,
            ..Default::default()
        };
        for t in &triples {
            let k = [store.ids[&t.subject], store.ids[&t.predicate], store.ids[&t.object]];
            store.spo.insert(k);
            store.pos.insert([k[1], k[2], k[0]]);
            store.osp.insert([k[2], k[0], k[1]]);
            store.predicates.insert(k[1]);
        }

        for term in &store.terms {
            if let Term::Iri(iri) = term {
                store
                    .labels
                    .entry(iri.clone())
                    .or_default()
                    .insert(local_name(iri));
            }
        }
        for t in &triples {
            let (Term::Iri(s), Term::Iri(p), Term::Literal(l)) = (&t.subject, &t.predicate, &t.object)
            else {
                continue;
            };
            if label_predicates.iter().any(|lp| lp == p) && !l.lexical.trim().is_empty() {
                store
                    .labels
                    .entry(s.clone())
                    .or_default()
                    .insert(l.lexical.clone());
            }
        }
        store
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    /// Lines dropped in lenient mode.
    pub fn skipped_lines(&self) -> usize {
        self.skipped
    }

    /// All triples in subject-predicate-object order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().map(|k| self.decode(*k))
    }

    pub fn contains(&self, t: &Triple) -> bool {
        match (self.id(&t.subject), self.id(&t.predicate), self.id(&t.object)) {
            (Some(s), Some(p), Some(o)) => self.spo.contains(&[s, p, o]),
            _ => false,
        }
    }

    pub fn labels(&self, iri: &str) -> Option<&BTreeSet<String>> {
        self.labels.get(iri)
    }

    pub fn label_map(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.labels
    }

    pub fn label_count(&self) -> usize {
        self.labels.values().map(BTreeSet::len).sum()
    }

    pub fn is_predicate(&self, iri: &str) -> bool {
        self.id(&Term::iri(iri))
            .is_some_and(|id| self.predicates.contains(&id))
    }

    pub fn predicate_iris(&self) -> impl Iterator<Item = &str> + '_ {
        self.predicates.iter().filter_map(|&id| self.terms[id as usize].as_iri())
    }

    /// IRIs occurring in subject or object position.
    pub fn node_iris(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for k in &self.spo {
            for id in [k[0], k[2]] {
                if let Term::Iri(s) = &self.terms[id as usize] {
                    out.insert(s.as_str());
                }
            }
        }
        out
    }

    /// Every distinct term in the store, sorted.
    pub fn vocabulary(&self) -> &[Term] {
        &self.terms
    }

    pub(crate) fn id(&self, term: &Term) -> Option<u32> {
        self.ids.get(term).copied()
    }

    pub(crate) fn term(&self, id: u32) -> &Term {
        &self.terms[id as usize]
    }

    fn decode(&self, k: [u32; 3]) -> Triple {
        Triple::new(
            self.term(k[0]).clone(),
            self.term(k[1]).clone(),
            self.term(k[2]).clone(),
        )
    }

    /// Id triples (in s, p, o layout) agreeing with every bound position.
    pub(crate) fn scan(
        &self,
        bound: [Option<u32>; 3],
        order: IndexOrder,
    ) -> impl Iterator<Item = [u32; 3]> + '_ {
        let perm = order.perm();
        let index = match order {
            IndexOrder::Spo => &self.spo,
            IndexOrder::Pos => &self.pos,
            IndexOrder::Osp => &self.osp,
        };
        let mut lo = [0u32; 3];
        let mut hi = [u32::MAX; 3];
        for (i, &pos) in perm.iter().enumerate() {
            match bound[pos] {
                Some(id) => {
                    lo[i] = id;
                    hi[i] = id;
                }
                None => break,
            }
        }
        index
            .range(lo..=hi)
            .map(move |key| {
                let mut spo = [0u32; 3];
                for (i, &pos) in perm.iter().enumerate() {
                    spo[pos] = key[i];
                }
                spo
            })
            .filter(move |spo| (0..3).all(|i| bound[i].is_none_or(|b| b == spo[i])))
    }

    pub(crate) fn scan_auto(&self, bound: [Option<u32>; 3]) -> impl Iterator<Item = [u32; 3]> + '_ {
        let mask = [bound[0].is_some(), bound[1].is_some(), bound[2].is_some()];
        self.scan(bound, IndexOrder::for_bound(mask))
    }

    /// Bindings under which `pattern` occurs in the store, sorted by the
    /// bound values in order of variable appearance.
    pub fn match_pattern(&self, pattern: &TriplePattern) -> Vec<Binding> {
        let mask = pattern.positions().map(|p| matches!(p, PatternTerm::Const(_)));
        self.match_with(pattern, IndexOrder::for_bound(mask))
    }

    /// Same as [`match_pattern`](Self::match_pattern) with an explicit driver index.
    pub fn match_with(&self, pattern: &TriplePattern, order: IndexOrder) -> Vec<Binding> {
        let mut bound = [None; 3];
        for (i, p) in pattern.positions().into_iter().enumerate() {
            if let PatternTerm::Const(t) = p {
                match self.id(t) {
                    Some(id) => bound[i] = Some(id),
                    None => return Vec::new(),
                }
            }
        }
        let vars = pattern.variables();
        let mut rows: Vec<Vec<u32>> = Vec::new();
        'triples: for spo in self.scan(bound, order) {
            let mut row: Vec<Option<u32>> = vec![None; vars.len()];
            for (i, p) in pattern.positions().into_iter().enumerate() {
                if let PatternTerm::Var(v) = p {
                    let slot = vars.iter().position(|x| x == v).expect("variable listed");
                    match row[slot] {
                        Some(prev) if prev != spo[i] => continue 'triples,
                        _ => row[slot] = Some(spo[i]),
                    }
                }
            }
            rows.push(row.into_iter().map(|x| x.expect("all variables bound")).collect());
        }
        rows.sort();
        rows.dedup();
        rows.into_iter()
            .map(|row| {
                vars.iter()
                    .zip(row)
                    .map(|(v, id)| (v.to_string(), self.term(id).clone()))
                    .collect()
            })
            .collect()
    }

    /// Predicates on edges incident to `iri`, tagged with direction.
    pub fn neighbors(&self, iri: &str) -> BTreeSet<(String, Direction)> {
        let mut out = BTreeSet::new();
        let Some(id) = self.id(&Term::iri(iri)) else {
            return out;
        };
        for [_, p, _] in self.scan([Some(id), None, None], IndexOrder::Spo) {
            if let Some(p) = self.term(p).as_iri() {
                out.insert((p.to_string(), Direction::Outgoing));
            }
        }
        for [_, p, _] in self.scan([None, None, Some(id)], IndexOrder::Osp) {
            if let Some(p) = self.term(p).as_iri() {
                out.insert((p.to_string(), Direction::Incoming));
            }
        }
        out
    }

    /// Predicates linking `a` and `b` in either direction.
    pub fn connecting_predicates(&self, a: &str, b: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let (Some(x), Some(y)) = (self.id(&Term::iri(a)), self.id(&Term::iri(b))) else {
            return out;
        };
        for (s, o) in [(x, y), (y, x)] {
            for [_, p, _] in self.scan([Some(s), None, Some(o)], IndexOrder::Osp) {
                if let Some(p) = self.term(p).as_iri() {
                    out.insert(p.to_string());
                }
            }
        }
        out
    }

    pub fn write_ntriples(&self, mut w: impl Write) -> io::Result<()> {
        for t in self.triples() {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }
}
