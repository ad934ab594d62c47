//! Line-oriented N-Triples reader.

use super::term::{is_absolute_iri, Literal, Term, Triple};

/// Why a single line failed to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub column: usize,
    pub message: String,
}

/// Parses one N-Triples line. Returns `Ok(None)` for blank and comment lines.
pub fn parse_line(line: &str) -> Result<Option<Triple>, SyntaxError> {
    let mut cur = Cursor::new(line);
    cur.skip_ws();
    if cur.at_end() || cur.peek() == Some('#') {
        return Ok(None);
    }
    let subject = cur.iri_or_blank()?;
    cur.skip_ws();
    let predicate = cur.iri_or_blank()?;
    cur.skip_ws();
    let object = match cur.peek() {
        Some('"') => cur.literal()?,
        _ => Term::Iri(cur.iri_or_blank()?),
    };
    cur.skip_ws();
    if cur.peek() != Some('.') {
        return Err(cur.error("expected terminating '.'"));
    }
    cur.bump();
    cur.skip_ws();
    if !cur.at_end() && cur.peek() != Some('#') {
        return Err(cur.error("unexpected text after '.'"));
    }
    Ok(Some(Triple::new(
        Term::Iri(subject),
        Term::Iri(predicate),
        object,
    )))
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
}

impl Cursor {
    fn new(src: &str) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r' | '\n')) {
            self.pos += 1;
        }
    }

    fn error(&self, message: &str) -> SyntaxError {
        SyntaxError {
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    /// Parses `<iri>`; blank nodes are rejected because every subject must be
    /// an absolute IRI.
    fn iri_or_blank(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Some('<') => {}
            Some('_') => return Err(self.error("blank nodes are not supported")),
            _ => return Err(self.error("expected '<'")),
        }
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated IRI")),
                Some('>') => break,
                Some('\\') => out.push(self.unicode_escape()?),
                Some(c) if c == ' ' || c == '<' || c == '"' => {
                    return Err(self.error("invalid character in IRI"))
                }
                Some(c) => out.push(c),
            }
        }
        if !is_absolute_iri(&out) {
            return Err(self.error("IRI is not absolute"));
        }
        Ok(out)
    }

    fn unicode_escape(&mut self) -> Result<char, SyntaxError> {
        let width = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.error("invalid escape")),
        };
        let mut code = 0u32;
        for _ in 0..width {
            let d = self
                .bump()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| self.error("invalid hex digit in escape"))?;
            code = code * 16 + d;
        }
        char::from_u32(code).ok_or_else(|| self.error("escape is not a valid code point"))
    }

    fn literal(&mut self) -> Result<Term, SyntaxError> {
        self.bump();
        let mut lexical = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated literal")),
                Some('"') => break,
                Some('\\') => {
                    let c = match self.peek() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u' | 'U') => {
                            lexical.push(self.unicode_escape()?);
                            continue;
                        }
                        _ => return Err(self.error("invalid escape in literal")),
                    };
                    self.bump();
                    lexical.push(c);
                }
                Some(c) => lexical.push(c),
            }
        }
        let tag = match self.peek() {
            Some('@') => {
                self.bump();
                let mut lang = String::from("@");
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        lang.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                if lang.len() == 1 {
                    return Err(self.error("empty language tag"));
                }
                Some(lang)
            }
            Some('^') => {
                self.bump();
                if self.bump() != Some('^') {
                    return Err(self.error("expected '^^'"));
                }
                let dt = self.iri_or_blank()?;
                Some(format!("^^<{dt}>"))
            }
            _ => None,
        };
        Ok(Term::Literal(Literal { lexical, tag }))
    }
}
