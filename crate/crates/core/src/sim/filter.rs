//! The filter forms the simulator understands: `?v op constant`,
//! `constant op ?v` and `regex(?v, "text")` (substring match).

use std::cmp::Ordering;

use super::term::{GroundTerm, TermResolver};
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn flipped(self) -> Self {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            op => op,
        }
    }

    fn accepts(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord.is_eq(),
            CmpOp::Ne => ord.is_ne(),
            CmpOp::Lt => ord.is_lt(),
            CmpOp::Le => ord.is_le(),
            CmpOp::Gt => ord.is_gt(),
            CmpOp::Ge => ord.is_ge(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Filter {
    /// `?var op constant`, normalised so the variable is on the left.
    Compare {
        var: String,
        op: CmpOp,
        constant: GroundTerm,
    },
    Contains {
        var: String,
        needle: String,
    },
}

impl Filter {
    pub fn variable(&self) -> &str {
        match self {
            Filter::Compare { var, .. } | Filter::Contains { var, .. } => var,
        }
    }

    /// Whether a solution whose filter variable has `value` passes. An
    /// unbound variable fails, as does an ordering test between terms
    /// that have no order.
    pub fn holds(&self, value: Option<&GroundTerm>) -> bool {
        let Some(value) = value else {
            return false;
        };
        match self {
            Filter::Contains { needle, .. } => value.text().contains(needle.as_str()),
            Filter::Compare { op, constant, .. } => {
                if let (Some(a), Some(b)) = (value.numeric_value(), constant.numeric_value()) {
                    return a.partial_cmp(&b).is_some_and(|ord| op.accepts(ord));
                }
                match op {
                    CmpOp::Eq => value == constant,
                    CmpOp::Ne => value != constant,
                    _ => match (value, constant) {
                        (
                            GroundTerm::Literal { value: a, .. },
                            GroundTerm::Literal { value: b, .. },
                        ) => op.accepts(a.cmp(b)),
                        _ => false,
                    },
                }
            }
        }
    }
}

pub(crate) fn compile_filter(body: &str, resolver: &TermResolver) -> Result<Filter, SimError> {
    let unsupported = || SimError::UnsupportedFilter(body.trim().to_owned());
    let mut expr = body.trim();
    while let Some(inner) = strip_outer_parens(expr) {
        expr = inner.trim();
    }

    if expr.len() > 5 && expr[..5].eq_ignore_ascii_case("regex") {
        let args = strip_outer_parens(expr[5..].trim_start()).ok_or_else(unsupported)?;
        let parts = split_top_level_commas(args);
        let [var, pattern] = parts.as_slice() else {
            return Err(unsupported());
        };
        let var = variable(var.trim()).ok_or_else(unsupported)?;
        let pattern = pattern.trim();
        if !pattern.starts_with(['"', '\'']) {
            return Err(unsupported());
        }
        let GroundTerm::Literal { value, .. } =
            resolver.literal(pattern).map_err(|_| unsupported())?
        else {
            return Err(unsupported());
        };
        return Ok(Filter::Contains { var, needle: value });
    }

    let (left, rest) = operand(expr).ok_or_else(unsupported)?;
    let rest = rest.trim_start();
    let (op, len) = [
        ("!=", CmpOp::Ne),
        ("<=", CmpOp::Le),
        (">=", CmpOp::Ge),
        ("=", CmpOp::Eq),
        ("<", CmpOp::Lt),
        (">", CmpOp::Gt),
    ]
    .into_iter()
    .find(|(sym, _)| rest.starts_with(sym))
    .map(|(sym, op)| (op, sym.len()))
    .ok_or_else(unsupported)?;
    let right = rest[len..].trim();
    let (right_check, tail) = operand(right).ok_or_else(unsupported)?;
    if !tail.trim().is_empty() || right_check != right {
        return Err(unsupported());
    }

    let constant = |text: &str| -> Result<GroundTerm, SimError> {
        match text.chars().next() {
            Some('<') => Ok(GroundTerm::iri(&text[1..text.len() - 1])),
            Some('"' | '\'') => resolver.literal(text),
            _ if text == "true" || text == "false" || text.parse::<f64>().is_ok() => {
                resolver.literal(text)
            }
            _ if text.contains(':') => Ok(GroundTerm::iri(resolver.prefixed(text)?)),
            _ => Err(unsupported()),
        }
    };
    match (variable(left), variable(right)) {
        (Some(var), None) => Ok(Filter::Compare {
            var,
            op,
            constant: constant(right)?,
        }),
        (None, Some(var)) => Ok(Filter::Compare {
            var,
            op: op.flipped(),
            constant: constant(left)?,
        }),
        _ => Err(unsupported()),
    }
}

fn variable(text: &str) -> Option<String> {
    let name = text.strip_prefix(['?', '$'])?;
    (!name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_'))
        .then(|| name.to_owned())
}

/// Splits the leading operand off `text`: an IRI, a quoted literal with its
/// suffix, or a run of characters up to whitespace or an operator.
fn operand(text: &str) -> Option<(&str, &str)> {
    let end = if text.starts_with('<') {
        text.find('>')? + 1
    } else if text.starts_with(['"', '\'']) {
        let quote = text.chars().next()?;
        let mut escaped = false;
        let close = text[1..].char_indices().find_map(|(i, c)| {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                c if c == quote => return Some(i + 1),
                _ => {}
            }
            None
        })?;
        let after = &text[close + 1..];
        close
            + 1
            + after
                .find(|c: char| c.is_whitespace() || "!<>=".contains(c))
                .unwrap_or(after.len())
    } else {
        text.find(|c: char| c.is_whitespace() || "!<>=".contains(c))
            .unwrap_or(text.len())
    };
    (end > 0).then(|| text.split_at(end))
}

/// `Some(inner)` when `text` is `( inner )` with the parens matching.
fn strip_outer_parens(text: &str) -> Option<&str> {
    if !text.starts_with('(') || !text.ends_with(')') {
        return None;
    }
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if let Some(q) = quote {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                c if c == q => quote = None,
                _ => {}
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return (i == text.len() - 1).then(|| &text[1..i]);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_top_level_commas(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if let Some(q) = quote {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                c if c == q => quote = None,
                _ => {}
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::term::XSD;

    fn resolver() -> TermResolver {
        TermResolver::new([("ex".to_owned(), "http://ex.org/".to_owned())].into())
    }

    fn compile(body: &str) -> Result<Filter, SimError> {
        compile_filter(body, &resolver())
    }

    fn int(n: i64) -> GroundTerm {
        GroundTerm::typed(n.to_string(), &format!("{XSD}integer"))
    }

    #[test]
    fn comparisons() {
        let f = compile("(?x > 5)").unwrap();
        assert!(f.holds(Some(&int(6))));
        assert!(!f.holds(Some(&int(5))));
        assert!(!f.holds(None));
        assert!(f.holds(Some(&GroundTerm::typed("5.5", &format!("{XSD}decimal")))));

        let flipped = compile("(5 >= ?x)").unwrap();
        assert_eq!(flipped.variable(), "x");
        assert!(flipped.holds(Some(&int(5))));
        assert!(!flipped.holds(Some(&int(6))));

        let ne = compile("(?x != ex:George)").unwrap();
        assert!(!ne.holds(Some(&GroundTerm::iri("http://ex.org/George"))));
        assert!(ne.holds(Some(&GroundTerm::iri("http://ex.org/Ann"))));

        let eq = compile("((?n = \"Ann\"@en))").unwrap();
        assert!(eq.holds(Some(&GroundTerm::literal("Ann", Some("en".into()), None))));
        assert!(!eq.holds(Some(&GroundTerm::simple("Ann"))));

        let iri = compile("(?x=<http://a>)").unwrap();
        assert!(iri.holds(Some(&GroundTerm::iri("http://a"))));

        let numeric_eq = compile("(?x = 5.0)").unwrap();
        assert!(numeric_eq.holds(Some(&int(5))));
        let lexical = compile("(?x < \"b\")").unwrap();
        assert!(lexical.holds(Some(&GroundTerm::simple("a"))));
        assert!(!lexical.holds(Some(&GroundTerm::iri("a"))));
    }

    #[test]
    fn regex_is_substring() {
        let f = compile("regex(?n, \"a(b)c\")").unwrap();
        assert!(f.holds(Some(&GroundTerm::simple("xa(b)cx"))));
        assert!(!f.holds(Some(&GroundTerm::simple("abc"))));
        assert!(compile("REGEX(?n, 'x')").is_ok());
    }

    #[test]
    fn unsupported_forms() {
        for body in [
            "(?x > ?y)",
            "(1 < 2)",
            "regex(?n, \"a\", \"i\")",
            "bound(?x)",
            "(?x > 5 && ?x < 9)",
            "(?x + 1 > 5)",
            "regex(str(?n), \"a\")",
            "(?x = foo)",
        ] {
            assert!(
                matches!(compile(body), Err(SimError::UnsupportedFilter(_))),
                "{body}"
            );
        }
        assert!(matches!(
            compile("(?x = foaf:x)"),
            Err(SimError::UndeclaredPrefix(_))
        ));
    }
}
