use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::model::{Term, TermKind};

use super::SimError;

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

/// A concrete RDF term stored in a triple store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GroundTerm {
    Iri {
        iri: String,
    },
    Blank {
        label: String,
    },
    Literal {
        value: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        language: Option<String>,
        /// `None` for simple literals (`xsd:string`).
        #[serde(skip_serializing_if = "Option::is_none")]
        datatype: Option<String>,
    },
}

impl GroundTerm {
    pub fn iri(iri: impl Into<String>) -> Self {
        GroundTerm::Iri { iri: iri.into() }
    }

    pub fn blank(label: impl Into<String>) -> Self {
        GroundTerm::Blank {
            label: label.into(),
        }
    }

    pub fn literal(
        value: impl Into<String>,
        language: Option<String>,
        datatype: Option<String>,
    ) -> Self {
        let datatype = datatype.filter(|dt| dt != &format!("{XSD}string"));
        GroundTerm::Literal {
            value: value.into(),
            language: language.map(|l| l.to_ascii_lowercase()),
            datatype,
        }
    }

    pub fn simple(value: impl Into<String>) -> Self {
        Self::literal(value, None, None)
    }

    pub fn typed(value: impl Into<String>, datatype: &str) -> Self {
        Self::literal(value, None, Some(datatype.to_owned()))
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            GroundTerm::Iri { iri } => Some(iri),
            _ => None,
        }
    }

    /// Numeric value of an `xsd` numeric literal.
    pub fn numeric_value(&self) -> Option<f64> {
        let GroundTerm::Literal {
            value,
            datatype: Some(dt),
            ..
        } = self
        else {
            return None;
        };
        let local = dt.strip_prefix(XSD)?;
        const NUMERIC: &[&str] = &[
            "integer",
            "decimal",
            "double",
            "float",
            "int",
            "long",
            "short",
            "byte",
            "nonNegativeInteger",
            "positiveInteger",
            "negativeInteger",
            "nonPositiveInteger",
            "unsignedInt",
            "unsignedLong",
            "unsignedShort",
            "unsignedByte",
        ];
        if NUMERIC.contains(&local) {
            value.trim().parse().ok()
        } else {
            None
        }
    }

    /// The string a `regex` filter searches: literal value or IRI text.
    pub fn text(&self) -> &str {
        match self {
            GroundTerm::Iri { iri } => iri,
            GroundTerm::Blank { label } => label,
            GroundTerm::Literal { value, .. } => value,
        }
    }
}

impl fmt::Display for GroundTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundTerm::Iri { iri } => write!(f, "<{iri}>"),
            GroundTerm::Blank { label } => write!(f, "_:{label}"),
            GroundTerm::Literal {
                value,
                language,
                datatype,
            } => {
                f.write_str("\"")?;
                for c in value.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")?;
                if let Some(lang) = language {
                    write!(f, "@{lang}")
                } else if let Some(dt) = datatype {
                    write!(f, "^^<{dt}>")
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Decodes string escapes (`\n`, `\"`, `\uXXXX`, ...). `None` on a bad escape.
pub(crate) fn unescape(raw: &str) -> Option<String> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        let decoded = match chars.next()? {
            't' => '\t',
            'b' => '\u{8}',
            'n' => '\n',
            'r' => '\r',
            'f' => '\u{c}',
            '"' => '"',
            '\'' => '\'',
            '\\' => '\\',
            'u' => hex_char(&mut chars, 4)?,
            'U' => hex_char(&mut chars, 8)?,
            _ => return None,
        };
        out.push(decoded);
    }
    Some(out)
}

fn hex_char(chars: &mut std::str::Chars<'_>, digits: usize) -> Option<char> {
    let hex: String = chars.take(digits).collect();
    if hex.len() != digits {
        return None;
    }
    char::from_u32(u32::from_str_radix(&hex, 16).ok()?)
}

/// Expands query terms to ground terms using the prologue's prefixes.
pub(crate) struct TermResolver {
    prefixes: BTreeMap<String, String>,
}

impl TermResolver {
    pub fn new(prefixes: BTreeMap<String, String>) -> Self {
        Self { prefixes }
    }

    pub fn prefixed(&self, pname: &str) -> Result<String, SimError> {
        let (prefix, local) = pname
            .split_once(':')
            .ok_or_else(|| SimError::UndeclaredPrefix(pname.to_owned()))?;
        let namespace = self
            .prefixes
            .get(prefix)
            .ok_or_else(|| SimError::UndeclaredPrefix(format!("{prefix}:")))?;
        Ok(format!("{namespace}{local}"))
    }

    /// Ground term for a constant query term; variables and blank nodes
    /// have none.
    pub fn resolve(&self, term: &Term) -> Result<Option<GroundTerm>, SimError> {
        let lexical = term.lexical();
        Ok(Some(match term.kind() {
            TermKind::Variable | TermKind::BlankNode => return Ok(None),
            TermKind::Iri => GroundTerm::iri(&lexical[1..lexical.len() - 1]),
            TermKind::PrefixedName => GroundTerm::iri(self.prefixed(lexical)?),
            TermKind::KeywordA => GroundTerm::iri(RDF_TYPE),
            TermKind::Literal { .. } => self.literal(lexical)?,
        }))
    }

    pub fn literal(&self, lexical: &str) -> Result<GroundTerm, SimError> {
        let malformed = || SimError::MalformedLiteral(lexical.to_owned());
        let first = lexical.chars().next().ok_or_else(malformed)?;
        if first != '"' && first != '\'' {
            return Ok(match lexical {
                "true" | "false" => GroundTerm::typed(lexical, &format!("{XSD}boolean")),
                _ if lexical.contains(['e', 'E']) => {
                    GroundTerm::typed(lexical, &format!("{XSD}double"))
                }
                _ if lexical.contains('.') => GroundTerm::typed(lexical, &format!("{XSD}decimal")),
                _ => GroundTerm::typed(lexical, &format!("{XSD}integer")),
            });
        }
        let quote_len = if lexical.len() >= 6 && lexical[1..].starts_with(&lexical[..1].repeat(2)) {
            3
        } else {
            1
        };
        let quote = &lexical[..quote_len];
        let body_end = lexical[quote_len..]
            .rfind(quote)
            .map(|i| i + quote_len)
            .filter(|&i| i >= quote_len)
            .ok_or_else(malformed)?;
        let value = unescape(&lexical[quote_len..body_end]).ok_or_else(malformed)?;
        let suffix = &lexical[body_end + quote_len..];
        if let Some(lang) = suffix.strip_prefix('@') {
            Ok(GroundTerm::literal(value, Some(lang.to_owned()), None))
        } else if let Some(dt) = suffix.strip_prefix("^^") {
            let dt = if dt.starts_with('<') && dt.ends_with('>') {
                dt[1..dt.len() - 1].to_owned()
            } else {
                self.prefixed(dt)?
            };
            Ok(GroundTerm::literal(value, None, Some(dt)))
        } else if suffix.is_empty() {
            Ok(GroundTerm::simple(value))
        } else {
            Err(malformed())
        }
    }
}
