//! Parser and serializer for the supported federated query subset:
//!
//! ```text
//! prologue SELECT projection WHERE { (SERVICE-block | OPTIONAL { SERVICE-block+ })+ } tail
//! ```
//!
//! A `SERVICE` body holds triple patterns (with `;`/`,` abbreviations),
//! `FILTER` expressions, or a single sub-`SELECT`. Everything outside that
//! grammar is rejected with [`ParseErrorKind::UnsupportedConstruct`] rather
//! than skipped.

mod lexer;
mod serialize;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{FederatedQuery, QuerySegment, ServicePattern, Term, TermKind, TriplePattern};
use lexer::{Lexer, Tok, Token};

pub use serialize::serialize_query;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParseErrorKind {
    Syntax,
    UnsupportedConstruct,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} error at {line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn at(text: &str, offset: usize, kind: ParseErrorKind, message: impl Into<String>) -> Self {
        let offset = offset.min(text.len());
        let before = &text[..offset];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = text[line_start..offset].chars().count() + 1;
        Self {
            line,
            column,
            message: message.into(),
            kind,
        }
    }

    pub fn is_unsupported(&self) -> bool {
        self.kind == ParseErrorKind::UnsupportedConstruct
    }
}

/// Parses query text into a [`FederatedQuery`].
pub fn parse_query(text: &str) -> Result<FederatedQuery, ParseError> {
    let stripped = lexer::strip_comments(text);
    let mut parser = Parser {
        lex: Lexer::new(&stripped, text),
        next_index: 0,
    };
    parser.query()
}

/// `PREFIX` declarations of a prologue. Malformed prologues yield whatever
/// declarations could be read before the first problem.
pub(crate) fn prologue_prefixes(prologue: &str) -> BTreeMap<String, String> {
    let stripped = lexer::strip_comments(prologue);
    let mut lex = Lexer::new(&stripped, prologue);
    let mut prefixes = BTreeMap::new();
    while let Ok(token) = lex.next() {
        match token.tok {
            Tok::Word if lex.text(token).eq_ignore_ascii_case("prefix") => {
                let (Ok(name), Ok(iri)) = (lex.next(), lex.next()) else {
                    break;
                };
                if name.tok != Tok::PName || iri.tok != Tok::Iri {
                    break;
                }
                let name = lex.text(name);
                let iri = lex.text(iri);
                prefixes.insert(
                    name.trim_end_matches(':').to_owned(),
                    iri[1..iri.len() - 1].to_owned(),
                );
            }
            Tok::Eof => break,
            _ => {}
        }
    }
    prefixes
}

const UNSUPPORTED_GROUP_KEYWORDS: &[&str] = &[
    "union", "graph", "bind", "values", "minus", "filter", "optional",
];

struct Parser<'a> {
    lex: Lexer<'a>,
    next_index: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, offset: usize, message: impl Into<String>) -> ParseError {
        self.lex.error(offset, ParseErrorKind::Syntax, message)
    }

    fn unsupported(&self, offset: usize, message: impl Into<String>) -> ParseError {
        self.lex
            .error(offset, ParseErrorKind::UnsupportedConstruct, message)
    }

    fn is_word(&self, token: Token, word: &str) -> bool {
        token.tok == Tok::Word && self.lex.text(token).eq_ignore_ascii_case(word)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ParseError> {
        let token = self.lex.next()?;
        if token.tok == tok {
            Ok(token)
        } else {
            Err(self.syntax(token.start, format!("expected {what}")))
        }
    }

    fn query(&mut self) -> Result<FederatedQuery, ParseError> {
        let select = loop {
            let token = self.lex.next()?;
            if self.is_word(token, "select") {
                break token;
            } else if self.is_word(token, "base") {
                self.expect(Tok::Iri, "IRI after BASE")?;
            } else if self.is_word(token, "prefix") {
                let name = self.expect(Tok::PName, "prefix name after PREFIX")?;
                if !self.lex.text(name).ends_with(':') {
                    return Err(self.syntax(name.start, "prefix name must end with ':'"));
                }
                self.expect(Tok::Iri, "IRI in PREFIX declaration")?;
            } else if ["construct", "ask", "describe"]
                .iter()
                .any(|w| self.is_word(token, w))
            {
                return Err(self.unsupported(token.start, "only SELECT queries are supported"));
            } else {
                return Err(self.syntax(token.start, "expected SELECT"));
            }
        };
        let src = self.lex.src();
        let prologue = src[..select.start].trim().to_owned();

        let projection_start = self.lex.pos;
        let projection_end = self.lex.projection_end()?;
        let projection = src[projection_start..projection_end].trim().to_owned();
        if projection.is_empty() {
            return Err(self.syntax(projection_start, "empty projection"));
        }
        let token = self.lex.peek()?;
        if self.is_word(token, "where") {
            self.lex.next()?;
        }
        let open = self.expect(Tok::LBrace, "'{' to open the query pattern")?;
        let segments = self.top_group()?;
        if segments.is_empty() {
            return Err(self.unsupported(open.start, "query contains no SERVICE pattern"));
        }

        let tail_start = self.lex.pos;
        loop {
            let token = self.lex.next()?;
            match token.tok {
                Tok::Eof => break,
                Tok::LBrace | Tok::RBrace => {
                    return Err(self.unsupported(
                        token.start,
                        "graph patterns after the query body are not supported",
                    ));
                }
                _ => {}
            }
        }
        let tail = src[tail_start..].trim().to_owned();

        Ok(FederatedQuery {
            prologue,
            projection,
            segments,
            tail,
        })
    }

    fn top_group(&mut self) -> Result<Vec<QuerySegment>, ParseError> {
        let mut segments = Vec::new();
        let mut current = Vec::new();
        loop {
            let token = self.lex.peek()?;
            match token.tok {
                Tok::RBrace => {
                    self.lex.next()?;
                    break;
                }
                Tok::Dot => {
                    self.lex.next()?;
                }
                Tok::Eof => return Err(self.syntax(token.start, "unterminated query pattern")),
                Tok::LBrace => {
                    return Err(self
                        .unsupported(token.start, "nested group graph patterns are not supported"))
                }
                Tok::Word if self.is_word(token, "service") => current.push(self.service()?),
                Tok::Word if self.is_word(token, "optional") => {
                    self.lex.next()?;
                    if !current.is_empty() {
                        segments.push(QuerySegment {
                            services: std::mem::take(&mut current),
                            inside_optional: false,
                        });
                    }
                    segments.push(self.optional_group()?);
                }
                Tok::Word
                    if UNSUPPORTED_GROUP_KEYWORDS
                        .iter()
                        .any(|w| self.is_word(token, w)) =>
                {
                    let word = self.lex.text(token).to_uppercase();
                    return Err(self.unsupported(
                        token.start,
                        format!("{word} is not supported at query level"),
                    ));
                }
                Tok::Iri | Tok::PName | Tok::Var | Tok::Blank | Tok::Literal { .. } | Tok::Word => {
                    return Err(self.unsupported(
                        token.start,
                        "triple patterns outside SERVICE blocks are not supported",
                    ));
                }
                _ => return Err(self.syntax(token.start, "unexpected token in query pattern")),
            }
        }
        if !current.is_empty() {
            segments.push(QuerySegment {
                services: current,
                inside_optional: false,
            });
        }
        Ok(segments)
    }

    fn optional_group(&mut self) -> Result<QuerySegment, ParseError> {
        let open = self.expect(Tok::LBrace, "'{' after OPTIONAL")?;
        let mut services = Vec::new();
        loop {
            let token = self.lex.peek()?;
            match token.tok {
                Tok::RBrace => {
                    self.lex.next()?;
                    break;
                }
                Tok::Dot => {
                    self.lex.next()?;
                }
                Tok::Eof => return Err(self.syntax(token.start, "unterminated OPTIONAL group")),
                Tok::Word if self.is_word(token, "service") => services.push(self.service()?),
                _ => {
                    return Err(self.unsupported(
                        token.start,
                        "OPTIONAL groups may only contain SERVICE blocks",
                    ));
                }
            }
        }
        if services.is_empty() {
            return Err(self.unsupported(open.start, "OPTIONAL group without SERVICE blocks"));
        }
        Ok(QuerySegment {
            services,
            inside_optional: true,
        })
    }

    fn service(&mut self) -> Result<ServicePattern, ParseError> {
        let keyword = self.lex.next()?;
        let mut token = self.lex.next()?;
        let mut silent = false;
        if self.is_word(token, "silent") {
            silent = true;
            token = self.lex.next()?;
        }
        let endpoint = match token.tok {
            Tok::Iri => Term::new(TermKind::Iri, self.lex.text(token)),
            Tok::PName => Term::new(TermKind::PrefixedName, self.lex.text(token)),
            Tok::Var => Term::new(TermKind::Variable, self.lex.text(token)),
            _ => return Err(self.syntax(token.start, "expected an IRI or variable after SERVICE")),
        };
        self.expect(Tok::LBrace, "'{' to open the SERVICE body")?;

        let original_index = self.next_index;
        self.next_index += 1;

        let body = self.lex.peek()?;
        let (triples, filters, sub_projection) = if self.is_word(body, "select") {
            self.lex.next()?;
            let projection = self.sub_select_projection()?;
            let token = self.lex.peek()?;
            if self.is_word(token, "where") {
                self.lex.next()?;
            }
            self.expect(Tok::LBrace, "'{' to open the sub-SELECT pattern")?;
            let (triples, filters) = self.triples_block()?;
            let close = self.lex.next()?;
            if close.tok != Tok::RBrace {
                return Err(self.unsupported(
                    close.start,
                    "sub-SELECT solution modifiers are not supported",
                ));
            }
            let projection = projection.unwrap_or_else(|| {
                triples
                    .iter()
                    .flat_map(|t: &TriplePattern| t.terms())
                    .filter_map(|(_, term)| term.variable_name())
                    .map(str::to_owned)
                    .collect()
            });
            (triples, filters, Some(projection))
        } else {
            let (triples, filters) = self.triples_block()?;
            (triples, filters, None)
        };
        if triples.is_empty() {
            return Err(self.syntax(keyword.start, "SERVICE body has no triple patterns"));
        }
        Ok(ServicePattern {
            endpoint,
            silent,
            triples,
            filters,
            sub_projection,
            original_index,
        })
    }

    /// `None` for `SELECT *`.
    fn sub_select_projection(&mut self) -> Result<Option<BTreeSet<String>>, ParseError> {
        let first = self.lex.next()?;
        if first.tok == Tok::Star {
            return Ok(None);
        }
        if first.tok == Tok::Word {
            return Err(self.unsupported(first.start, "sub-SELECT modifiers are not supported"));
        }
        let mut vars = BTreeSet::new();
        let mut token = first;
        loop {
            match token.tok {
                Tok::Var => {
                    vars.insert(self.lex.text(token)[1..].to_owned());
                }
                Tok::LParen => {
                    return Err(self.unsupported(
                        token.start,
                        "expressions in sub-SELECT projections are not supported",
                    ));
                }
                _ => {
                    return Err(
                        self.syntax(token.start, "expected a variable in sub-SELECT projection")
                    )
                }
            }
            let next = self.lex.peek()?;
            if next.tok == Tok::Var || next.tok == Tok::LParen {
                token = self.lex.next()?;
            } else {
                break;
            }
        }
        Ok(Some(vars))
    }

    /// Parses triple patterns and filters up to and including the closing brace.
    fn triples_block(&mut self) -> Result<(Vec<TriplePattern>, Vec<String>), ParseError> {
        let mut triples = Vec::new();
        let mut filters = Vec::new();
        let mut needs_separator = false;
        loop {
            let token = self.lex.peek()?;
            match token.tok {
                Tok::RBrace => {
                    self.lex.next()?;
                    return Ok((triples, filters));
                }
                Tok::Dot => {
                    self.lex.next()?;
                    needs_separator = false;
                }
                Tok::Eof => return Err(self.syntax(token.start, "unterminated SERVICE body")),
                Tok::LBrace => {
                    return Err(self.unsupported(
                        token.start,
                        "nested groups inside SERVICE are not supported",
                    ));
                }
                Tok::Other('[') => {
                    return Err(self
                        .unsupported(token.start, "blank node property lists are not supported"));
                }
                Tok::Word if self.is_word(token, "filter") => {
                    self.lex.next()?;
                    filters.push(self.filter_body()?);
                    needs_separator = false;
                }
                Tok::Word if self.is_word(token, "service") => {
                    return Err(
                        self.unsupported(token.start, "nested SERVICE blocks are not supported")
                    );
                }
                Tok::Word
                    if UNSUPPORTED_GROUP_KEYWORDS
                        .iter()
                        .any(|w| self.is_word(token, w))
                        || self.is_word(token, "select") =>
                {
                    let word = self.lex.text(token).to_uppercase();
                    return Err(self.unsupported(
                        token.start,
                        format!("{word} is not supported inside SERVICE"),
                    ));
                }
                _ => {
                    if needs_separator {
                        return Err(
                            self.syntax(token.start, "expected '.' between triple patterns")
                        );
                    }
                    self.triples_same_subject(&mut triples)?;
                    needs_separator = true;
                }
            }
        }
    }

    fn filter_body(&mut self) -> Result<String, ParseError> {
        let token = self.lex.peek()?;
        let start = token.start;
        match token.tok {
            Tok::LParen => {}
            Tok::Word if self.is_word(token, "not") || self.is_word(token, "exists") => {
                return Err(self.unsupported(token.start, "EXISTS filters are not supported"));
            }
            Tok::Word | Tok::PName | Tok::Iri => {
                self.lex.next()?;
            }
            _ => return Err(self.syntax(token.start, "expected a filter expression")),
        }
        let (_, end) = self.lex.balanced_parens()?;
        Ok(self.lex.src()[start..end].to_owned())
    }

    fn term(&mut self, role: &str) -> Result<Term, ParseError> {
        let token = self.lex.next()?;
        let text = self.lex.text(token);
        let kind = match token.tok {
            Tok::Iri => TermKind::Iri,
            Tok::PName => TermKind::PrefixedName,
            Tok::Var => TermKind::Variable,
            Tok::Blank => TermKind::BlankNode,
            Tok::Literal {
                language_tag,
                datatype,
            } => TermKind::Literal {
                language_tag,
                datatype,
            },
            Tok::Word if text == "a" => TermKind::KeywordA,
            Tok::Word if text == "true" || text == "false" => TermKind::Literal {
                language_tag: false,
                datatype: false,
            },
            _ => return Err(self.syntax(token.start, format!("expected {role}"))),
        };
        let term = Term::new(kind, text);
        let valid = match role {
            "subject" => !matches!(kind, TermKind::Literal { .. } | TermKind::KeywordA),
            "predicate" => !matches!(kind, TermKind::Literal { .. } | TermKind::BlankNode),
            _ => kind != TermKind::KeywordA,
        };
        if !valid {
            return Err(self.syntax(token.start, format!("{text} cannot be used as {role}")));
        }
        Ok(term)
    }

    fn triples_same_subject(&mut self, out: &mut Vec<TriplePattern>) -> Result<(), ParseError> {
        let subject = self.term("subject")?;
        loop {
            let predicate = self.term("predicate")?;
            loop {
                let object = self.term("object")?;
                out.push(TriplePattern::new(
                    subject.clone(),
                    predicate.clone(),
                    object,
                ));
                if self.lex.peek()?.tok == Tok::Comma {
                    self.lex.next()?;
                } else {
                    break;
                }
            }
            if self.lex.peek()?.tok != Tok::Semi {
                return Ok(());
            }
            while self.lex.peek()?.tok == Tok::Semi {
                self.lex.next()?;
            }
            let next = self.lex.peek()?;
            let ends = matches!(next.tok, Tok::Dot | Tok::RBrace) || self.is_word(next, "filter");
            if ends {
                return Ok(());
            }
        }
    }
}
