//! Line-oriented N-Triples parsing and serialization.
//!
//! Each physical line holds at most one statement:
//!
//! ```text
//! <subject> <predicate> <object> .
//! ```
//!
//! Blank lines and `#` comments are skipped. Malformed lines produce a
//! [`ParseError`] carrying a byte offset and never influence neighbouring
//! lines. IRIs are kept verbatim; literal escapes (`\t \b \n \r \f \" \' \\`,
//! `\uXXXX`, `\UXXXXXXXX`) are decoded.

use std::fmt;
use std::io::{self, BufRead};

use thiserror::Error;

/// Optional annotation carried by a literal. A literal has either a
/// language tag or a datatype, never both.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LiteralAnnotation {
    Plain,
    Language(String),
    Datatype(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Iri,
    Literal,
    BlankNode,
}

/// An RDF term.
///
/// `BlankNode` stores the label without the `_:` prefix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(String),
    BlankNode(String),
    Literal {
        value: String,
        annotation: LiteralAnnotation,
    },
}

impl Term {
    /// Builds an IRI term, rejecting empty values and values that contain
    /// whitespace or angle brackets.
    pub fn iri(value: impl Into<String>) -> Result<Term, TermError> {
        let value = value.into();
        if value.is_empty() {
            return Err(TermError::EmptyIri);
        }
        if let Some(c) = value
            .chars()
            .find(|c| c.is_whitespace() || *c == '<' || *c == '>')
        {
            return Err(TermError::InvalidIriChar(c));
        }
        Ok(Term::Iri(value))
    }

    pub fn blank(label: impl Into<String>) -> Result<Term, TermError> {
        let label = label.into();
        if !is_valid_blank_label(&label) {
            return Err(TermError::InvalidBlankLabel(label));
        }
        Ok(Term::BlankNode(label))
    }

    pub fn literal(value: impl Into<String>) -> Term {
        Term::Literal {
            value: value.into(),
            annotation: LiteralAnnotation::Plain,
        }
    }

    pub fn lang_literal(value: impl Into<String>, tag: impl Into<String>) -> Term {
        Term::Literal {
            value: value.into(),
            annotation: LiteralAnnotation::Language(tag.into()),
        }
    }

    pub fn typed_literal(value: impl Into<String>, datatype: impl Into<String>) -> Term {
        Term::Literal {
            value: value.into(),
            annotation: LiteralAnnotation::Datatype(datatype.into()),
        }
    }

    pub fn kind(&self) -> TermKind {
        match self {
            Term::Iri(_) => TermKind::Iri,
            Term::BlankNode(_) => TermKind::BlankNode,
            Term::Literal { .. } => TermKind::Literal,
        }
    }

    /// The lexical value: IRI text, blank node label or literal lexical form.
    pub fn value(&self) -> &str {
        match self {
            Term::Iri(v) | Term::BlankNode(v) => v,
            Term::Literal { value, .. } => value,
        }
    }

    pub fn language_tag(&self) -> Option<&str> {
        match self {
            Term::Literal {
                annotation: LiteralAnnotation::Language(tag),
                ..
            } => Some(tag),
            _ => None,
        }
    }

    pub fn datatype_iri(&self) -> Option<&str> {
        match self {
            Term::Literal {
                annotation: LiteralAnnotation::Datatype(dt),
                ..
            } => Some(dt),
            _ => None,
        }
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(v) => Some(v),
            _ => None,
        }
    }

    /// Identifier used for resources in the knowledge base: the IRI text,
    /// or `_:label` for blank nodes. Literals have no resource key.
    pub fn resource_key(&self) -> Option<String> {
        match self {
            Term::Iri(v) => Some(v.clone()),
            Term::BlankNode(l) => Some(format!("_:{l}")),
            Term::Literal { .. } => None,
        }
    }

    /// Inverse of [`Term::resource_key`].
    pub fn from_resource_key(key: &str) -> Result<Term, TermError> {
        match key.strip_prefix("_:") {
            Some(label) => Term::blank(label),
            None => Term::iri(key),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(v) => write!(f, "<{v}>"),
            Term::BlankNode(l) => write!(f, "_:{l}"),
            Term::Literal { value, annotation } => {
                f.write_str("\"")?;
                for c in value.chars() {
                    match c {
                        '\\' => f.write_str("\\\\")?,
                        '"' => f.write_str("\\\"")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        '\t' => f.write_str("\\t")?,
                        c if c.is_control() => write!(f, "\\u{:04X}", c as u32)?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")?;
                match annotation {
                    LiteralAnnotation::Plain => Ok(()),
                    LiteralAnnotation::Language(tag) => write!(f, "@{tag}"),
                    LiteralAnnotation::Datatype(dt) => write!(f, "^^<{dt}>"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("IRI is empty")]
    EmptyIri,
    #[error("IRI contains forbidden character {0:?}")]
    InvalidIriChar(char),
    #[error("invalid blank node label {0:?}")]
    InvalidBlankLabel(String),
    #[error("literal not allowed in subject position")]
    LiteralSubject,
    #[error("predicate must be an IRI")]
    PredicateNotIri,
}

/// One RDF statement. The predicate is always an IRI and the subject is
/// never a literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    subject: Term,
    predicate: Term,
    object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Triple, TermError> {
        if subject.kind() == TermKind::Literal {
            return Err(TermError::LiteralSubject);
        }
        if predicate.kind() != TermKind::Iri {
            return Err(TermError::PredicateNotIri);
        }
        Ok(Triple {
            subject,
            predicate,
            object,
        })
    }

    /// Shorthand for a statement whose three terms are IRIs.
    pub fn iris(s: &str, p: &str, o: &str) -> Result<Triple, TermError> {
        Triple::new(Term::iri(s)?, Term::iri(p)?, Term::iri(o)?)
    }

    pub fn subject(&self) -> &Term {
        &self.subject
    }

    pub fn predicate(&self) -> &Term {
        &self.predicate
    }

    /// Predicate IRI text.
    pub fn predicate_iri(&self) -> &str {
        self.predicate.value()
    }

    pub fn object(&self) -> &Term {
        &self.object
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unterminated IRI")]
    UnterminatedIri,
    #[error("invalid character {0:?} in IRI")]
    InvalidIri(char),
    #[error("empty IRI")]
    EmptyIri,
    #[error("unterminated literal")]
    UnterminatedLiteral,
    #[error("bad escape sequence")]
    BadEscape,
    #[error("invalid blank node label")]
    BadBlankNode,
    #[error("invalid language tag")]
    BadLanguageTag,
    #[error("literal in subject position")]
    LiteralSubject,
    #[error("predicate is not an IRI")]
    PredicateNotIri,
    #[error("missing object")]
    MissingObject,
    #[error("missing dot")]
    MissingDot,
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unexpected end of line")]
    UnexpectedEnd,
    #[error("trailing content after dot")]
    TrailingContent,
    #[error("line is not valid UTF-8")]
    InvalidUtf8,
}

/// A malformed line: byte offset into the line plus a category.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn at(offset: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { offset, kind }
    }
}

/// Parses one physical line.
///
/// Returns `Ok(None)` for blank and comment lines.
pub fn parse_ntriple_line(line: &str) -> Result<Option<Triple>, ParseError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut cur = Cursor { src: line, pos: 0 };

    cur.skip_ws();
    match cur.peek() {
        None | Some('#') => return Ok(None),
        Some('"') => return Err(ParseError::at(cur.pos, ParseErrorKind::LiteralSubject)),
        _ => {}
    }
    let subject = cur.term()?;

    cur.skip_ws();
    let pred_start = cur.pos;
    let predicate = match cur.peek() {
        None => return Err(ParseError::at(cur.pos, ParseErrorKind::UnexpectedEnd)),
        Some('<') => cur.term()?,
        Some(_) => return Err(ParseError::at(pred_start, ParseErrorKind::PredicateNotIri)),
    };

    cur.skip_ws();
    match cur.peek() {
        None | Some('.') => return Err(ParseError::at(cur.pos, ParseErrorKind::MissingObject)),
        _ => {}
    }
    let object = cur.term()?;

    cur.skip_ws();
    match cur.peek() {
        Some('.') => cur.bump(),
        None => return Err(ParseError::at(cur.pos, ParseErrorKind::MissingDot)),
        Some(c) => return Err(ParseError::at(cur.pos, ParseErrorKind::UnexpectedChar(c))),
    }
    cur.skip_ws();
    match cur.peek() {
        None | Some('#') => {}
        Some(_) => return Err(ParseError::at(cur.pos, ParseErrorKind::TrailingContent)),
    }

    Ok(Some(Triple {
        subject,
        predicate,
        object,
    }))
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) {
        if let Some(c) = self.peek() {
            self.pos += c.len_utf8();
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.pos += 1;
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some('<') => self.iri().map(Term::Iri),
            Some('_') => self.blank(),
            Some('"') => self.literal(),
            Some(c) => Err(ParseError::at(self.pos, ParseErrorKind::UnexpectedChar(c))),
            None => Err(ParseError::at(self.pos, ParseErrorKind::UnexpectedEnd)),
        }
    }

    fn iri(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        self.bump();
        let body_start = self.pos;
        loop {
            match self.peek() {
                None => return Err(ParseError::at(start, ParseErrorKind::UnterminatedIri)),
                Some('>') => break,
                Some(c) if c.is_whitespace() || c == '<' => {
                    return Err(ParseError::at(self.pos, ParseErrorKind::InvalidIri(c)))
                }
                Some(_) => self.bump(),
            }
        }
        let body = &self.src[body_start..self.pos];
        self.bump();
        if body.is_empty() {
            return Err(ParseError::at(start, ParseErrorKind::EmptyIri));
        }
        Ok(body.to_string())
    }

    fn blank(&mut self) -> Result<Term, ParseError> {
        let start = self.pos;
        if !self.rest().starts_with("_:") {
            return Err(ParseError::at(start, ParseErrorKind::BadBlankNode));
        }
        self.pos += 2;
        let label_start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || matches!(c, '_' | '-' | '.') {
                self.bump();
            } else {
                break;
            }
        }
        // A trailing '.' belongs to the statement terminator, not the label.
        while self.pos > label_start && self.src[..self.pos].ends_with('.') {
            self.pos -= 1;
        }
        let label = &self.src[label_start..self.pos];
        if !is_valid_blank_label(label) {
            return Err(ParseError::at(start, ParseErrorKind::BadBlankNode));
        }
        Ok(Term::BlankNode(label.to_string()))
    }

    fn literal(&mut self) -> Result<Term, ParseError> {
        let start = self.pos;
        self.bump();
        let mut value = String::new();
        loop {
            let esc_pos = self.pos;
            match self.peek() {
                None => return Err(ParseError::at(start, ParseErrorKind::UnterminatedLiteral)),
                Some('"') => {
                    self.bump();
                    break;
                }
                Some('\\') => {
                    self.bump();
                    let c = self
                        .peek()
                        .ok_or(ParseError::at(esc_pos, ParseErrorKind::BadEscape))?;
                    self.bump();
                    let decoded = match c {
                        't' => '\t',
                        'b' => '\u{8}',
                        'n' => '\n',
                        'r' => '\r',
                        'f' => '\u{c}',
                        '"' => '"',
                        '\'' => '\'',
                        '\\' => '\\',
                        'u' => self.hex_escape(4, esc_pos)?,
                        'U' => self.hex_escape(8, esc_pos)?,
                        _ => return Err(ParseError::at(esc_pos, ParseErrorKind::BadEscape)),
                    };
                    value.push(decoded);
                }
                Some(c) => {
                    value.push(c);
                    self.bump();
                }
            }
        }
        let annotation = match self.peek() {
            Some('@') => {
                let tag_start = self.pos;
                self.bump();
                let body_start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        self.bump();
                    } else {
                        break;
                    }
                }
                let tag = &self.src[body_start..self.pos];
                if !is_valid_language_tag(tag) {
                    return Err(ParseError::at(tag_start, ParseErrorKind::BadLanguageTag));
                }
                LiteralAnnotation::Language(tag.to_string())
            }
            Some('^') => {
                if !self.rest().starts_with("^^<") {
                    return Err(ParseError::at(self.pos, ParseErrorKind::UnexpectedChar('^')));
                }
                self.pos += 2;
                LiteralAnnotation::Datatype(self.iri()?)
            }
            _ => LiteralAnnotation::Plain,
        };
        Ok(Term::Literal { value, annotation })
    }

    fn hex_escape(&mut self, digits: usize, esc_pos: usize) -> Result<char, ParseError> {
        let hex = self
            .rest()
            .get(..digits)
            .filter(|h| h.chars().all(|c| c.is_ascii_hexdigit()))
            .ok_or(ParseError::at(esc_pos, ParseErrorKind::BadEscape))?;
        let code = u32::from_str_radix(hex, 16)
            .map_err(|_| ParseError::at(esc_pos, ParseErrorKind::BadEscape))?;
        let c = char::from_u32(code).ok_or(ParseError::at(esc_pos, ParseErrorKind::BadEscape))?;
        self.pos += digits;
        Ok(c)
    }
}

fn is_valid_blank_label(label: &str) -> bool {
    !label.is_empty()
        && !label.starts_with(['.', '-'])
        && !label.ends_with('.')
        && label
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn is_valid_language_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let primary = parts.next().unwrap_or("");
    !primary.is_empty()
        && primary.chars().all(|c| c.is_ascii_alphabetic())
        && parts.all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

/// A malformed line, numbered from 1 across the whole stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub error: ParseError,
}

/// Accounting for a run of consumed lines.
///
/// `lines_read == triples_emitted + lines_skipped` always holds; blank,
/// comment and malformed lines are all counted as skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub lines_read: usize,
    pub triples_emitted: usize,
    pub lines_skipped: usize,
    pub errors: Vec<LineError>,
}

impl ParseReport {
    pub fn merge(&mut self, other: ParseReport) {
        self.lines_read += other.lines_read;
        self.triples_emitted += other.triples_emitted;
        self.lines_skipped += other.lines_skipped;
        self.errors.extend(other.errors);
    }
}

/// Reads a line source in fixed-size batches of physical lines.
///
/// Successive calls to [`BatchReader::read_batch`] resume where the previous
/// one stopped; line numbers in [`LineError`] are global to the stream.
pub struct BatchReader<R> {
    reader: R,
    line_no: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> BatchReader<R> {
    pub fn new(reader: R) -> Self {
        BatchReader {
            reader,
            line_no: 0,
            buf: Vec::new(),
        }
    }

    /// Number of lines consumed so far.
    pub fn lines_consumed(&self) -> usize {
        self.line_no
    }

    /// Consumes up to `batch_size` lines and returns the well-formed triples
    /// among them. An I/O failure discards the partial batch.
    pub fn read_batch(&mut self, batch_size: usize) -> io::Result<(Vec<Triple>, ParseReport)> {
        if batch_size == 0 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "batch size must be at least 1",
            ));
        }
        let mut triples = Vec::new();
        let mut report = ParseReport::default();
        while report.lines_read < batch_size {
            self.buf.clear();
            if self.reader.read_until(b'\n', &mut self.buf)? == 0 {
                break;
            }
            self.line_no += 1;
            report.lines_read += 1;
            let parsed = match std::str::from_utf8(&self.buf) {
                Ok(line) => parse_ntriple_line(line),
                Err(e) => Err(ParseError::at(e.valid_up_to(), ParseErrorKind::InvalidUtf8)),
            };
            match parsed {
                Ok(Some(t)) => {
                    triples.push(t);
                    report.triples_emitted += 1;
                }
                Ok(None) => report.lines_skipped += 1,
                Err(error) => {
                    report.lines_skipped += 1;
                    report.errors.push(LineError {
                        line: self.line_no,
                        error,
                    });
                }
            }
        }
        Ok((triples, report))
    }

    /// Reads the remainder of the stream as one batch.
    pub fn read_to_end(&mut self) -> io::Result<(Vec<Triple>, ParseReport)> {
        self.read_batch(usize::MAX)
    }
}

/// Parses an entire line source.
pub fn read_all<R: BufRead>(reader: R) -> io::Result<(Vec<Triple>, ParseReport)> {
    BatchReader::new(reader).read_to_end()
}
