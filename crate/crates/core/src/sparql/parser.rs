//! Recursive-descent parser working directly on characters.
//!
//! Angle-bracketed text is an IRI only when it contains "://"; anything else
//! is a mention slot. Constructs outside the executable subset are captured
//! verbatim as [`Unsupported`] entries instead of being rejected.

use crate::kb::{
    is_absolute_iri, Pattern, Term, RDF_TYPE, XSD_BOOLEAN, XSD_DECIMAL, XSD_DOUBLE, XSD_INTEGER,
};

use super::ast::{
    CountTarget, Feature, Form, Location, Projection, SparqlError, SparqlTemplate, TemplateTerm,
    Unsupported,
};

pub fn parse(text: &str) -> Result<SparqlTemplate, SparqlError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        unsupported: Vec::new(),
    };
    let (form, projected) = p.head()?;
    let patterns = p.where_clause()?;
    p.modifiers()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected text after query"));
    }

    if patterns.is_empty() {
        return Err(p.error_at(0, "query has no triple patterns"));
    }
    let t = SparqlTemplate {
        form,
        patterns,
        unsupported: p.unsupported,
        raw: text.to_string(),
    };
    let vars = t.variables();
    for v in projected {
        if !vars.contains(v.as_str()) {
            return Err(p_error(0, format!("projected variable ?{v} does not occur in the pattern")));
        }
    }
    Ok(t)
}

fn p_error(position: usize, message: impl Into<String>) -> SparqlError {
    SparqlError::Syntax {
        position,
        message: message.into(),
    }
}

const WHERE_KEYWORDS: [(&str, Feature); 8] = [
    ("FILTER", Feature::Filter),
    ("OPTIONAL", Feature::Optional),
    ("MINUS", Feature::Minus),
    ("BIND", Feature::Bind),
    ("VALUES", Feature::Values),
    ("SERVICE", Feature::Service),
    ("GRAPH", Feature::Graph),
    ("UNION", Feature::Union),
];

const MODIFIERS: [(&str, Feature); 5] = [
    ("GROUP", Feature::GroupBy),
    ("HAVING", Feature::Having),
    ("ORDER", Feature::OrderBy),
    ("LIMIT", Feature::Limit),
    ("OFFSET", Feature::Offset),
];

struct Parser {
    chars: Vec<char>,
    pos: usize,
    unsupported: Vec<Unsupported>,
}

impl Parser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn error(&self, message: impl Into<String>) -> SparqlError {
        p_error(self.pos, message)
    }

    fn error_at(&self, position: usize, message: impl Into<String>) -> SparqlError {
        p_error(position, message)
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => self.pos += 1,
                Some('#') => {
                    while !matches!(self.peek(), None | Some('\n')) {
                        self.pos += 1;
                    }
                }
                _ => return,
            }
        }
    }

    fn expect(&mut self, c: char) -> Result<(), SparqlError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    /// Alphabetic word at the cursor, without consuming it.
    fn peek_word(&self) -> String {
        self.chars[self.pos..]
            .iter()
            .take_while(|c| c.is_ascii_alphabetic())
            .collect()
    }

    fn keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let w = self.peek_word();
        if w.eq_ignore_ascii_case(kw) {
            self.pos += w.chars().count();
            true
        } else {
            false
        }
    }

    fn collapsed(&self, start: usize) -> String {
        let s: String = self.chars[start..self.pos].iter().collect();
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    fn flag(&mut self, feature: Feature, location: Location, start: usize) {
        let text = self.collapsed(start);
        self.unsupported.push(Unsupported {
            feature,
            location,
            text,
        });
    }

    /// Skips a balanced `open … close` block, honouring strings and IRIs.
    fn skip_balanced(&mut self, open: char, close: char) -> Result<(), SparqlError> {
        let start = self.pos;
        let mut depth = 0usize;
        loop {
            match self.peek() {
                None => return Err(self.error_at(start, format!("unbalanced '{open}'"))),
                Some('"') | Some('\'') => {
                    self.string()?;
                    continue;
                }
                Some(c) if c == open => depth += 1,
                Some(c) if c == close => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos += 1;
                        return Ok(());
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
    }

    fn var_name(&mut self) -> Result<String, SparqlError> {
        let start = self.pos;
        if !matches!(self.peek(), Some('?' | '$')) {
            return Err(self.error("expected variable"));
        }
        self.pos += 1;
        let name: String = self.chars[self.pos..]
            .iter()
            .take_while(|c| c.is_alphanumeric() || **c == '_')
            .collect();
        if name.is_empty() {
            return Err(self.error_at(start, "empty variable name"));
        }
        self.pos += name.chars().count();
        Ok(name)
    }

    fn head(&mut self) -> Result<(Form, Vec<String>), SparqlError> {
        self.skip_ws();
        let w = self.peek_word();
        if w.eq_ignore_ascii_case("PREFIX") || w.eq_ignore_ascii_case("BASE") {
            return Err(self.error("PREFIX/BASE declarations are not supported; use full IRIs"));
        }
        if self.keyword("ASK") {
            return Ok((Form::Ask, Vec::new()));
        }
        if !self.keyword("SELECT") {
            return Err(self.error("expected SELECT or ASK"));
        }
        let distinct = if self.keyword("DISTINCT") {
            true
        } else {
            self.keyword("REDUCED");
            false
        };

        let mut vars = Vec::new();
        let mut counts: Vec<(bool, CountTarget, Option<String>)> = Vec::new();
        let mut star = false;
        let mut aggregates = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    star = true;
                }
                Some('?' | '$') => vars.push(self.var_name()?),
                Some('(') => {
                    let save = self.pos;
                    self.pos += 1;
                    match self.count_expr()? {
                        Some((d, target)) if self.keyword("AS") => {
                            self.skip_ws();
                            let alias = self.var_name()?;
                            self.expect(')')?;
                            counts.push((d, target, Some(alias)));
                        }
                        _ => {
                            self.pos = save;
                            self.skip_balanced('(', ')')?;
                            aggregates.push(start);
                            self.flag(Feature::Aggregate, Location::Projection, start);
                        }
                    }
                }
                Some(_) if self.peek_word().eq_ignore_ascii_case("COUNT") => {
                    match self.count_expr()? {
                        Some((d, target)) => counts.push((d, target, None)),
                        None => return Err(self.error_at(start, "malformed COUNT")),
                    }
                }
                _ => break,
            }
        }
        if star && (!vars.is_empty() || !counts.is_empty() || !aggregates.is_empty()) {
            return Err(self.error("'*' cannot be combined with other projections"));
        }
        if !counts.is_empty() && (!vars.is_empty() || !aggregates.is_empty() || counts.len() > 1) {
            // Grouped aggregation: keep the variables, flag the aggregates.
            if vars.is_empty() {
                return Err(self.error("multiple COUNT projections are not supported"));
            }
            for (d, target, alias) in counts {
                let inner = match target {
                    CountTarget::All => "*".to_string(),
                    CountTarget::Var(v) => format!("?{v}"),
                };
                let d = if d { "DISTINCT " } else { "" };
                let text = match alias {
                    Some(a) => format!("(COUNT({d}{inner}) AS ?{a})"),
                    None => format!("COUNT({d}{inner})"),
                };
                self.unsupported.push(Unsupported {
                    feature: Feature::Aggregate,
                    location: Location::Projection,
                    text,
                });
            }
            return Ok((
                Form::Select {
                    distinct,
                    projection: Projection::Vars(vars.clone()),
                },
                vars,
            ));
        }
        if let Some((count_distinct, target, alias)) = counts.pop() {
            let projected = match &target {
                CountTarget::Var(v) => vec![v.clone()],
                CountTarget::All => Vec::new(),
            };
            // SELECT DISTINCT (COUNT(?x) …) is folded into COUNT(DISTINCT ?x).
            return Ok((
                Form::Count {
                    distinct: count_distinct || distinct,
                    target,
                    alias,
                },
                projected,
            ));
        }
        if !star && vars.is_empty() && aggregates.is_empty() {
            return Err(self.error("empty projection"));
        }
        let projection = if star {
            Projection::All
        } else {
            Projection::Vars(vars.clone())
        };
        Ok((
            Form::Select {
                distinct,
                projection,
            },
            vars,
        ))
    }

    /// `COUNT ( [DISTINCT] (*|?v) )`; `None` if the cursor is not at COUNT.
    fn count_expr(&mut self) -> Result<Option<(bool, CountTarget)>, SparqlError> {
        let save = self.pos;
        if !self.keyword("COUNT") {
            self.pos = save;
            return Ok(None);
        }
        self.skip_ws();
        if self.peek() != Some('(') {
            self.pos = save;
            return Ok(None);
        }
        self.pos += 1;
        let distinct = self.keyword("DISTINCT");
        self.skip_ws();
        let target = match self.peek() {
            Some('*') => {
                self.pos += 1;
                CountTarget::All
            }
            Some('?' | '$') => CountTarget::Var(self.var_name()?),
            _ => {
                self.pos = save;
                return Ok(None);
            }
        };
        self.skip_ws();
        if self.peek() != Some(')') {
            self.pos = save;
            return Ok(None);
        }
        self.pos += 1;
        Ok(Some((distinct, target)))
    }

    fn where_clause(&mut self) -> Result<Vec<Pattern<TemplateTerm>>, SparqlError> {
        self.skip_ws();
        if self.peek_word().eq_ignore_ascii_case("FROM") {
            return Err(self.error("FROM clauses are not supported"));
        }
        self.keyword("WHERE");
        self.expect('{')?;
        let mut patterns = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            match self.peek() {
                None => return Err(self.error("unterminated group, expected '}'")),
                Some('}') => {
                    self.pos += 1;
                    return Ok(patterns);
                }
                Some('.') => self.pos += 1,
                Some('{') => {
                    self.skip_balanced('{', '}')?;
                    while self.keyword("UNION") {
                        self.skip_ws();
                        if self.peek() != Some('{') {
                            return Err(self.error("expected '{' after UNION"));
                        }
                        self.skip_balanced('{', '}')?;
                    }
                    self.flag(Feature::Union, Location::Where, start);
                }
                Some(c) if c.is_ascii_alphabetic() && self.where_keyword().is_some() => {
                    let feature = self.where_keyword().expect("checked");
                    self.pos += self.peek_word().chars().count();
                    self.skip_ws();
                    match self.peek() {
                        Some('(') => self.skip_balanced('(', ')')?,
                        Some('{') => self.skip_balanced('{', '}')?,
                        _ => {
                            // FILTER regex(...), SERVICE <x> { }, GRAPH ?g { }, VALUES ?x { }
                            while !matches!(self.peek(), None | Some('{' | '(' | '}')) {
                                self.pos += 1;
                            }
                            match self.peek() {
                                Some('(') => self.skip_balanced('(', ')')?,
                                Some('{') => self.skip_balanced('{', '}')?,
                                _ => return Err(self.error_at(start, format!("malformed {feature}"))),
                            }
                        }
                    }
                    self.flag(feature, Location::Where, start);
                }
                Some(_) => self.triples_block(&mut patterns)?,
            }
        }
    }

    fn where_keyword(&self) -> Option<Feature> {
        let w = self.peek_word();
        WHERE_KEYWORDS
            .iter()
            .find(|(k, _)| w.eq_ignore_ascii_case(k))
            .map(|(_, f)| *f)
    }

    fn modifier_keyword(&self) -> Option<Feature> {
        let w = self.peek_word();
        MODIFIERS
            .iter()
            .find(|(k, _)| w.eq_ignore_ascii_case(k))
            .map(|(_, f)| *f)
    }

    fn modifiers(&mut self) -> Result<(), SparqlError> {
        loop {
            self.skip_ws();
            let start = self.pos;
            let Some(feature) = self.modifier_keyword() else {
                return Ok(());
            };
            self.pos += self.peek_word().chars().count();
            if matches!(feature, Feature::GroupBy | Feature::OrderBy) && !self.keyword("BY") {
                return Err(self.error("expected BY"));
            }
            // Consume until the next modifier keyword at top level.
            loop {
                self.skip_ws();
                match self.peek() {
                    None => break,
                    Some('(') => self.skip_balanced('(', ')')?,
                    Some('"' | '\'') => {
                        self.string()?;
                    }
                    Some(c) if c.is_ascii_alphabetic() && self.modifier_keyword().is_some() => break,
                    Some(c) if c.is_ascii_alphabetic() => self.pos += self.peek_word().chars().count(),
                    Some(_) => self.pos += 1,
                }
            }
            if self.pos == start {
                return Err(self.error("empty modifier"));
            }
            self.flag(feature, Location::Modifier, start);
        }
    }

    fn triples_block(&mut self, out: &mut Vec<Pattern<TemplateTerm>>) -> Result<(), SparqlError> {
        let subject_at = self.pos;
        let subject = self.term()?;
        if matches!(subject, TemplateTerm::Const(Term::Literal(_))) {
            return Err(self.error_at(subject_at, "literal in subject position"));
        }
        loop {
            self.skip_ws();
            let pred_at = self.pos;
            let predicate = if self.peek() == Some('a')
                && !self.peek_at(1).is_some_and(|c| c.is_alphanumeric() || c == '_' || c == ':')
            {
                self.pos += 1;
                TemplateTerm::Const(Term::iri(RDF_TYPE))
            } else {
                self.term()?
            };
            if matches!(predicate, TemplateTerm::Const(Term::Literal(_))) {
                return Err(self.error_at(pred_at, "literal in predicate position"));
            }
            loop {
                let object = self.term()?;
                out.push(Pattern::new(subject.clone(), predicate.clone(), object));
                self.skip_ws();
                if self.peek() == Some(',') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            self.skip_ws();
            if self.peek() == Some(';') {
                self.pos += 1;
                self.skip_ws();
                // Trailing ';' before '.' or '}' is allowed.
                if matches!(self.peek(), Some('.' | '}')) {
                    break;
                }
            } else {
                break;
            }
        }
        self.skip_ws();
        match self.peek() {
            Some('.') => {
                self.pos += 1;
                Ok(())
            }
            Some('}') => Ok(()),
            Some(c) if c.is_ascii_alphabetic() && self.where_keyword().is_some() => Ok(()),
            Some('{') => Ok(()),
            _ => Err(self.error("expected '.' or '}' after triple pattern")),
        }
    }

    fn term(&mut self) -> Result<TemplateTerm, SparqlError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.error("unexpected end of query")),
            Some('?' | '$') => Ok(TemplateTerm::Var(self.var_name()?)),
            Some('<') => {
                let text = self.angle()?;
                if text.contains("://") {
                    if !is_absolute_iri(&text) {
                        return Err(self.error_at(start, "malformed IRI"));
                    }
                    Ok(TemplateTerm::Const(Term::Iri(text)))
                } else {
                    Ok(TemplateTerm::Slot(text))
                }
            }
            Some('"' | '\'') => {
                let lexical = self.string()?;
                match self.peek() {
                    Some('@') => {
                        self.pos += 1;
                        let lang: String = self.chars[self.pos..]
                            .iter()
                            .take_while(|c| c.is_ascii_alphanumeric() || **c == '-')
                            .collect();
                        if lang.is_empty() {
                            return Err(self.error("empty language tag"));
                        }
                        self.pos += lang.len();
                        Ok(TemplateTerm::Const(Term::lang_literal(lexical, &lang)))
                    }
                    Some('^') if self.peek_at(1) == Some('^') => {
                        self.pos += 2;
                        let dt_at = self.pos;
                        if self.peek() != Some('<') {
                            return Err(self.error("expected datatype IRI"));
                        }
                        let dt = self.angle()?;
                        if !dt.contains("://") || !is_absolute_iri(&dt) {
                            return Err(self.error_at(dt_at, "datatype must be an absolute IRI"));
                        }
                        Ok(TemplateTerm::Const(Term::typed_literal(lexical, &dt)))
                    }
                    _ => Ok(TemplateTerm::Const(Term::literal(lexical))),
                }
            }
            Some(c) if c.is_ascii_digit() || ((c == '+' || c == '-') && self.peek_at(1).is_some_and(|d| d.is_ascii_digit() || d == '.')) || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) => {
                self.number()
            }
            Some('[') => Err(self.error("blank nodes are not supported")),
            Some('(') => Err(self.error("collections are not supported")),
            Some('_') if self.peek_at(1) == Some(':') => Err(self.error("blank nodes are not supported")),
            Some(c) if c.is_alphabetic() => {
                let word: String = self.chars[self.pos..]
                    .iter()
                    .take_while(|c| c.is_alphanumeric() || **c == '_' || **c == '-')
                    .collect();
                let after = self.peek_at(word.chars().count());
                if after == Some(':') {
                    return Err(self.error("prefixed names are not supported; use full IRIs"));
                }
                match word.as_str() {
                    "true" | "false" => {
                        self.pos += word.len();
                        Ok(TemplateTerm::Const(Term::typed_literal(word, XSD_BOOLEAN)))
                    }
                    _ => Err(self.error(format!("unexpected '{word}'"))),
                }
            }
            Some(':') => Err(self.error("prefixed names are not supported; use full IRIs")),
            Some(c) => Err(self.error(format!("unexpected '{c}'"))),
        }
    }

    fn angle(&mut self) -> Result<String, SparqlError> {
        let start = self.pos;
        self.pos += 1;
        let mut text = String::new();
        loop {
            match self.peek() {
                None | Some('\n' | '<' | '{' | '}') => {
                    return Err(self.error_at(start, "unterminated '<'"))
                }
                Some('>') => {
                    self.pos += 1;
                    break;
                }
                Some(c) => {
                    text.push(c);
                    self.pos += 1;
                }
            }
        }
        if text.trim().is_empty() {
            return Err(self.error_at(start, "empty '<>'"));
        }
        Ok(text)
    }

    fn string(&mut self) -> Result<String, SparqlError> {
        let start = self.pos;
        let quote = self.peek().expect("called at a quote");
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None | Some('\n') => return Err(self.error_at(start, "unterminated string")),
                Some(c) if c == quote => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    self.pos += 1;
                    let c = match self.peek() {
                        Some('t') => '\t',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('b') => '\u{8}',
                        Some('f') => '\u{c}',
                        Some(c @ ('"' | '\'' | '\\')) => c,
                        _ => return Err(self.error("invalid escape")),
                    };
                    self.pos += 1;
                    out.push(c);
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn number(&mut self) -> Result<TemplateTerm, SparqlError> {
        let start = self.pos;
        if matches!(self.peek(), Some('+' | '-')) {
            self.pos += 1;
        }
        let mut dot = false;
        let mut exp = false;
        while let Some(c) = self.peek() {
            match c {
                '0'..='9' => {}
                // A '.' followed by a non-digit ends the triple, not the number.
                '.' if !dot && !exp && self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => {
                    dot = true
                }
                'e' | 'E' if !exp => {
                    exp = true;
                    if matches!(self.peek_at(1), Some('+' | '-')) {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let dt = if exp {
            XSD_DOUBLE
        } else if dot {
            XSD_DECIMAL
        } else {
            XSD_INTEGER
        };
        if text.parse::<f64>().is_err() {
            return Err(self.error_at(start, "malformed number"));
        }
        Ok(TemplateTerm::Const(Term::typed_literal(text, dt)))
    }
}
