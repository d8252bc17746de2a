//! Line-oriented N-Triples reader.

use super::term::{unescape, GroundTerm};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct NTriplesError {
    pub line: usize,
    pub message: String,
}

pub type Triple = (GroundTerm, GroundTerm, GroundTerm);

/// Parses an N-Triples document. Blank lines and `#` comments are skipped.
pub fn parse_ntriples(text: &str) -> Result<Vec<Triple>, NTriplesError> {
    let mut triples = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let fail = |message: String| NTriplesError {
            line: n + 1,
            message,
        };
        let mut cur = Cursor { rest: line };
        cur.skip_ws();
        if cur.rest.is_empty() || cur.rest.starts_with('#') {
            continue;
        }
        let subject = match cur.term().map_err(fail)? {
            t @ (GroundTerm::Iri { .. } | GroundTerm::Blank { .. }) => t,
            _ => return Err(fail("subject must be an IRI or blank node".into())),
        };
        let predicate = match cur.term().map_err(fail)? {
            t @ GroundTerm::Iri { .. } => t,
            _ => return Err(fail("predicate must be an IRI".into())),
        };
        let object = cur.term().map_err(fail)?;
        cur.skip_ws();
        cur.rest = cur
            .rest
            .strip_prefix('.')
            .ok_or_else(|| fail("expected '.'".into()))?;
        cur.skip_ws();
        if !(cur.rest.is_empty() || cur.rest.starts_with('#')) {
            return Err(fail(format!("unexpected trailing text {:?}", cur.rest)));
        }
        triples.push((subject, predicate, object));
    }
    Ok(triples)
}

struct Cursor<'a> {
    rest: &'a str,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start_matches([' ', '\t']);
    }

    fn term(&mut self) -> Result<GroundTerm, String> {
        self.skip_ws();
        if self.rest.starts_with('<') {
            self.iri().map(GroundTerm::iri)
        } else if let Some(rest) = self.rest.strip_prefix("_:") {
            let end = rest
                .find(|c: char| c.is_whitespace() || c == '<' || c == '"')
                .unwrap_or(rest.len());
            let mut label = &rest[..end];
            // a trailing '.' terminates the statement rather than the label
            while let Some(stripped) = label.strip_suffix('.') {
                label = stripped;
            }
            if label.is_empty() {
                return Err("empty blank node label".into());
            }
            self.rest = &rest[label.len()..];
            Ok(GroundTerm::blank(label))
        } else if self.rest.starts_with('"') {
            self.literal()
        } else {
            Err(format!(
                "unexpected {:?}",
                self.rest.chars().next().unwrap_or(' ')
            ))
        }
    }

    fn iri(&mut self) -> Result<String, String> {
        let body = &self.rest[1..];
        let end = body.find('>').ok_or("unterminated IRI")?;
        let raw = &body[..end];
        if raw.contains(|c: char| c.is_whitespace() || c == '<' || c == '"') {
            return Err(format!("invalid IRI <{raw}>"));
        }
        self.rest = &body[end + 1..];
        unescape(raw).ok_or_else(|| format!("bad escape in IRI <{raw}>"))
    }

    fn literal(&mut self) -> Result<GroundTerm, String> {
        let body = &self.rest[1..];
        let mut end = None;
        let mut escaped = false;
        for (i, c) in body.char_indices() {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => {
                    end = Some(i);
                    break;
                }
                _ => {}
            }
        }
        let end = end.ok_or("unterminated literal")?;
        let value = unescape(&body[..end]).ok_or("bad escape in literal")?;
        self.rest = &body[end + 1..];
        if let Some(rest) = self.rest.strip_prefix('@') {
            let len = rest
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
                .unwrap_or(rest.len());
            if len == 0 {
                return Err("empty language tag".into());
            }
            self.rest = &rest[len..];
            Ok(GroundTerm::literal(
                value,
                Some(rest[..len].to_owned()),
                None,
            ))
        } else if let Some(rest) = self.rest.strip_prefix("^^") {
            self.rest = rest;
            if !self.rest.starts_with('<') {
                return Err("datatype must be an IRI".into());
            }
            let dt = self.iri()?;
            Ok(GroundTerm::literal(value, None, Some(dt)))
        } else {
            Ok(GroundTerm::simple(value))
        }
    }
}
