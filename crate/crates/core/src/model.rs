//! Abstract syntax for the supported federated query subset.
//!
//! A [`FederatedQuery`] is a sequence of [`QuerySegment`]s, each holding the
//! `SERVICE` blocks that may be freely reordered among themselves. Prologue,
//! projection and solution modifiers are kept as opaque text because nothing
//! in the cost model reads them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

/// Lexical category of a term as it appeared in the query text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Iri,
    PrefixedName,
    Variable,
    Literal {
        language_tag: bool,
        datatype: bool,
    },
    BlankNode,
    /// The `a` shorthand for `rdf:type`.
    KeywordA,
}

/// A term with its exact surface text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Term {
    kind: TermKind,
    lexical: String,
}

impl Term {
    pub(crate) fn new(kind: TermKind, lexical: impl Into<String>) -> Self {
        Self {
            kind,
            lexical: lexical.into(),
        }
    }

    pub fn iri(iri: &str) -> Self {
        Self::new(TermKind::Iri, format!("<{iri}>"))
    }

    pub fn prefixed(pname: &str) -> Self {
        Self::new(TermKind::PrefixedName, pname)
    }

    /// A variable written with the `?` sigil.
    pub fn var(name: &str) -> Self {
        Self::new(TermKind::Variable, format!("?{name}"))
    }

    /// A plain string literal; `value` must not need escaping.
    pub fn literal(value: &str) -> Self {
        Self::new(
            TermKind::Literal {
                language_tag: false,
                datatype: false,
            },
            format!("\"{value}\""),
        )
    }

    pub fn blank(label: &str) -> Self {
        Self::new(TermKind::BlankNode, format!("_:{label}"))
    }

    pub fn a() -> Self {
        Self::new(TermKind::KeywordA, "a")
    }

    pub fn kind(&self) -> TermKind {
        self.kind
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn is_variable(&self) -> bool {
        self.kind == TermKind::Variable
    }

    pub fn is_literal(&self) -> bool {
        matches!(self.kind, TermKind::Literal { .. })
    }

    pub fn is_blank(&self) -> bool {
        self.kind == TermKind::BlankNode
    }

    /// Variable name without its `?`/`$` sigil.
    pub fn variable_name(&self) -> Option<&str> {
        self.is_variable().then(|| &self.lexical[1..])
    }

    /// Blank node label without the `_:` prefix.
    pub fn blank_label(&self) -> Option<&str> {
        self.is_blank().then(|| &self.lexical[2..])
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lexical)
    }
}

/// Position of a term inside a triple pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Subject,
    Predicate,
    Object,
}

impl Position {
    pub const ALL: [Position; 3] = [Position::Subject, Position::Predicate, Position::Object];
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl TriplePattern {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        Self {
            subject,
            predicate,
            object,
        }
    }

    pub fn term(&self, position: Position) -> &Term {
        match position {
            Position::Subject => &self.subject,
            Position::Predicate => &self.predicate,
            Position::Object => &self.object,
        }
    }

    /// `(position, term)` for each of the three slots, in subject/predicate/object order.
    pub fn terms(&self) -> impl Iterator<Item = (Position, &Term)> {
        Position::ALL.into_iter().map(move |p| (p, self.term(p)))
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

/// One `SERVICE` block.
#[derive(Debug, Clone, PartialEq)]
pub struct ServicePattern {
    pub endpoint: Term,
    pub silent: bool,
    /// Triple patterns with `;` and `,` abbreviations expanded.
    pub triples: Vec<TriplePattern>,
    /// `FILTER` bodies, verbatim.
    pub filters: Vec<String>,
    /// Projection of a sub-`SELECT` body, if the block is one.
    pub sub_projection: Option<BTreeSet<String>>,
    /// 0-based position among all `SERVICE` blocks of the source query.
    pub original_index: usize,
}

impl ServicePattern {
    pub fn new(endpoint: Term, triples: Vec<TriplePattern>, original_index: usize) -> Self {
        Self {
            endpoint,
            silent: false,
            triples,
            filters: Vec::new(),
            sub_projection: None,
            original_index,
        }
    }

    /// Endpoint variable name for `SERVICE ?x { ... }`.
    pub fn endpoint_variable(&self) -> Option<&str> {
        self.endpoint.variable_name()
    }

    /// Number of literal terms across all triple patterns.
    pub fn literal_count(&self) -> usize {
        self.triples
            .iter()
            .flat_map(|t| t.terms())
            .filter(|(_, term)| term.is_literal())
            .count()
    }

    /// Variables occurring in the triple patterns, restricted to the
    /// sub-projection when present. The endpoint variable is not included
    /// unless it also occurs in the graph pattern.
    pub fn pattern_variables(&self) -> BTreeSet<String> {
        let mut vars: BTreeSet<String> = self
            .triples
            .iter()
            .flat_map(|t| t.terms())
            .filter_map(|(_, term)| term.variable_name())
            .map(str::to_owned)
            .collect();
        if let Some(projection) = &self.sub_projection {
            vars.retain(|v| projection.contains(v));
        }
        vars
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySegment {
    pub services: Vec<ServicePattern>,
    pub inside_optional: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedQuery {
    /// `BASE`/`PREFIX` declarations, verbatim.
    pub prologue: String,
    /// Everything between `SELECT` and `WHERE`, verbatim.
    pub projection: String,
    pub segments: Vec<QuerySegment>,
    /// Solution modifiers after the closing brace, verbatim.
    pub tail: String,
}

impl FederatedQuery {
    pub fn services(&self) -> impl Iterator<Item = &ServicePattern> {
        self.segments.iter().flat_map(|s| s.services.iter())
    }

    pub fn service_count(&self) -> usize {
        self.segments.iter().map(|s| s.services.len()).sum()
    }

    /// `originalIndex` values of each segment in current order.
    pub fn order(&self) -> Vec<Vec<usize>> {
        self.segments
            .iter()
            .map(|s| s.services.iter().map(|sp| sp.original_index).collect())
            .collect()
    }

    /// The same query with each segment's services rearranged to the given
    /// `originalIndex` sequences. `None` unless `order` is a permutation of
    /// every segment.
    pub fn with_order(&self, order: &[Vec<usize>]) -> Option<FederatedQuery> {
        if order.len() != self.segments.len() {
            return None;
        }
        let mut out = self.clone();
        for (segment, wanted) in out.segments.iter_mut().zip(order) {
            if wanted.len() != segment.services.len() {
                return None;
            }
            let mut pool: Vec<Option<ServicePattern>> = std::mem::take(&mut segment.services)
                .into_iter()
                .map(Some)
                .collect();
            for &idx in wanted {
                let slot = pool
                    .iter()
                    .position(|s| s.as_ref().is_some_and(|s| s.original_index == idx))?;
                segment.services.push(pool[slot].take()?);
            }
        }
        Some(out)
    }

    /// `PREFIX` declarations of the prologue as `(prefix, namespace IRI)`.
    pub fn prefixes(&self) -> BTreeMap<String, String> {
        crate::parser::prologue_prefixes(&self.prologue)
    }
}

/// Variable names (sigil stripped) known to be bound.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BindingSet {
    variables: BTreeSet<String>,
}

impl BindingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.variables.contains(name)
    }

    pub fn insert(&mut self, name: impl Into<String>) -> bool {
        self.variables.insert(name.into())
    }

    pub fn extend<I, S>(&mut self, names: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.variables.extend(names.into_iter().map(Into::into));
    }

    pub fn is_subset(&self, other: &BindingSet) -> bool {
        self.variables.is_subset(&other.variables)
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for BindingSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self {
            variables: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Variables a service makes available to everything evaluated after it.
///
/// The sub-projection when present; otherwise every triple-pattern variable
/// plus the endpoint variable.
pub fn exposed_variables(service: &ServicePattern) -> BTreeSet<String> {
    if let Some(projection) = &service.sub_projection {
        return projection.clone();
    }
    let mut vars = service.pattern_variables();
    if let Some(v) = service.endpoint_variable() {
        vars.insert(v.to_owned());
    }
    vars
}

/// Positions occupied by each exposed variable that is not already bound.
pub fn variable_positions(
    service: &ServicePattern,
    bound: &BindingSet,
) -> BTreeMap<String, BTreeSet<Position>> {
    let exposed = exposed_variables(service);
    let mut positions: BTreeMap<String, BTreeSet<Position>> = BTreeMap::new();
    for triple in &service.triples {
        for (position, term) in triple.terms() {
            let Some(name) = term.variable_name() else {
                continue;
            };
            if exposed.contains(name) && !bound.contains(name) {
                positions
                    .entry(name.to_owned())
                    .or_default()
                    .insert(position);
            }
        }
    }
    positions
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(s: Term, p: Term, o: Term) -> TriplePattern {
        TriplePattern::new(s, p, o)
    }

    #[test]
    fn exposed_includes_endpoint_variable() {
        let s = ServicePattern::new(
            Term::var("authorURI"),
            vec![tp(
                Term::var("paper"),
                Term::iri("http://purl.org/dc/elements/1.1/creator"),
                Term::var("authorURI"),
            )],
            2,
        );
        let exposed: Vec<_> = exposed_variables(&s).into_iter().collect();
        assert_eq!(exposed, vec!["authorURI", "paper"]);
    }

    #[test]
    fn sub_projection_restricts_exposure() {
        let mut s = ServicePattern::new(
            Term::iri("http://e"),
            vec![tp(Term::var("x"), Term::prefixed(":p"), Term::var("y"))],
            0,
        );
        s.sub_projection = Some(["x".to_owned()].into());
        assert_eq!(exposed_variables(&s), ["x".to_owned()].into());
        assert_eq!(s.pattern_variables(), ["x".to_owned()].into());
    }

    #[test]
    fn dollar_and_question_sigils_name_the_same_variable() {
        let s = ServicePattern::new(
            Term::iri("http://e"),
            vec![
                tp(Term::var("x"), Term::prefixed(":p"), Term::var("y")),
                tp(
                    Term::new(TermKind::Variable, "$x"),
                    Term::prefixed(":q"),
                    Term::literal("v"),
                ),
            ],
            0,
        );
        let positions = variable_positions(&s, &BindingSet::new());
        assert_eq!(positions["x"], [Position::Subject].into());
        assert_eq!(positions.len(), 2);
    }

    #[test]
    fn predicate_variable_position() {
        let s = ServicePattern::new(
            Term::iri("http://resource3"),
            vec![tp(
                Term::iri("http://George"),
                Term::var("p"),
                Term::iri("http://Nick"),
            )],
            2,
        );
        let positions = variable_positions(&s, &BindingSet::new());
        assert_eq!(positions.len(), 1);
        assert_eq!(positions["p"], [Position::Predicate].into());
    }

    #[test]
    fn chain_variable_has_two_positions() {
        let s = ServicePattern::new(
            Term::iri("http://resource2"),
            vec![
                tp(
                    Term::iri("http://George"),
                    Term::prefixed(":friend"),
                    Term::var("ent1"),
                ),
                tp(
                    Term::var("ent1"),
                    Term::prefixed(":friend"),
                    Term::iri("http://Nick"),
                ),
            ],
            1,
        );
        let positions = variable_positions(&s, &BindingSet::new());
        assert_eq!(
            positions["ent1"],
            [Position::Subject, Position::Object].into()
        );
    }

    #[test]
    fn fully_bound_pattern_has_no_positions() {
        let s = ServicePattern::new(
            Term::iri("http://e"),
            vec![tp(Term::var("s"), Term::var("p"), Term::var("o"))],
            0,
        );
        let bound: BindingSet = ["s", "p", "o"].into_iter().collect();
        assert!(variable_positions(&s, &bound).is_empty());
    }
}
