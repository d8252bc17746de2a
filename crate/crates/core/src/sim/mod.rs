//! Federation simulator: in-memory endpoints and a bind-join evaluator that
//! counts remote calls.
//!
//! A service with a constant endpoint is called once per distinct
//! projection of the current solutions onto its variables (at least once).
//! `SERVICE ?v` is called once per distinct IRI bound to `?v`; an IRI with
//! no store behind it contributes no solutions.

mod eval;
mod filter;
mod ntriples;
mod store;
mod term;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::model::FederatedQuery;
use crate::planner::{segment_initial_bindings, valid_orderings, PlanError};

pub use ntriples::{parse_ntriples, NTriplesError, Triple};
pub use store::{load_federation, Dictionary, Federation, TermId, TripleStore};
pub use term::{GroundTerm, RDF_TYPE, XSD};

use eval::CompiledQuery;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("no store for endpoint {0}")]
    UnknownEndpoint(String),
    #[error("unsupported filter: {0}")]
    UnsupportedFilter(String),
    #[error("undeclared prefix {0}")]
    UndeclaredPrefix(String),
    #[error("malformed literal {0}")]
    MalformedLiteral(String),
    #[error("endpoint {0} is listed twice")]
    DuplicateEndpoint(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: line {line}: {message}", path.display())]
    NTriples {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("every ordering exceeds {max_rows} intermediate solutions")]
    BudgetExceeded { max_rows: usize },
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ServiceCalls {
    pub original_index: usize,
    pub calls: usize,
}

pub type Solution = BTreeMap<String, GroundTerm>;

#[derive(Debug, Clone)]
pub struct SimulationResult {
    /// Solutions over every variable of the query, in evaluation order.
    pub solutions: Vec<Solution>,
    /// Calls per service, in execution order.
    pub per_service_calls: Vec<ServiceCalls>,
    pub total_calls: usize,
    /// Number of solutions after each service.
    pub intermediate_sizes: Vec<usize>,
    pub wall_time: Duration,
}

impl SimulationResult {
    /// Solutions sorted, for multiset comparison.
    pub fn sorted_solutions(&self) -> Vec<Solution> {
        let mut out = self.solutions.clone();
        out.sort();
        out
    }
}

/// Evaluates the query's services left to right, segment by segment.
/// `OPTIONAL` segments are left-outer-joined as a unit.
pub fn evaluate_sequence(
    query: &FederatedQuery,
    fed: &Federation,
) -> Result<SimulationResult, SimError> {
    Ok(evaluate_sequence_bounded(query, fed, usize::MAX)?.expect("unbounded evaluation completes"))
}

/// As [`evaluate_sequence`], but gives up (`Ok(None)`) as soon as an
/// intermediate result holds more than `max_rows` solutions.
pub fn evaluate_sequence_bounded(
    query: &FederatedQuery,
    fed: &Federation,
    max_rows: usize,
) -> Result<Option<SimulationResult>, SimError> {
    let start = Instant::now();
    let compiled = CompiledQuery::new(query, fed)?;
    let Some(outcome) = compiled.run(max_rows) else {
        return Ok(None);
    };
    let solutions = compiled.ground(&outcome.rows);
    Ok(Some(SimulationResult {
        solutions,
        total_calls: outcome.calls.iter().map(|c| c.calls).sum(),
        per_service_calls: outcome.calls,
        intermediate_sizes: outcome.intermediate_sizes,
        wall_time: start.elapsed(),
    }))
}

/// The cheapest valid ordering as measured by the simulator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OptimalOrder {
    /// `originalIndex` sequence per segment.
    pub order: Vec<Vec<usize>>,
    pub total_calls: usize,
    pub intermediate_total: usize,
    pub orderings_evaluated: usize,
    /// Orderings abandoned for exceeding the row budget.
    pub orderings_over_budget: usize,
}

/// Evaluates every valid ordering and keeps the one with the fewest calls;
/// ties go to fewer intermediate solutions, then the lexicographically
/// smallest `originalIndex` sequence.
pub fn simulated_optimal(
    query: &FederatedQuery,
    fed: &Federation,
    cap: usize,
) -> Result<OptimalOrder, SimError> {
    simulated_optimal_bounded(query, fed, cap, usize::MAX)
}

/// As [`simulated_optimal`], skipping orderings whose intermediate results
/// exceed `max_rows` solutions.
pub fn simulated_optimal_bounded(
    query: &FederatedQuery,
    fed: &Federation,
    cap: usize,
    max_rows: usize,
) -> Result<OptimalOrder, SimError> {
    let mut per_segment = Vec::new();
    for (k, (segment, initial)) in query
        .segments
        .iter()
        .zip(segment_initial_bindings(query))
        .enumerate()
    {
        if segment.services.len() > cap {
            return Err(PlanError::ExhaustiveCapExceeded {
                segment: k,
                services: segment.services.len(),
                cap,
            }
            .into());
        }
        per_segment.push(valid_orderings(segment, &initial)?);
    }
    // Surface unknown endpoints and bad filters before the search.
    CompiledQuery::new(query, fed)?;

    let mut best: Option<OptimalOrder> = None;
    let mut evaluated = 0;
    let mut over_budget = 0;
    let mut pick = vec![0usize; per_segment.len()];
    loop {
        let order: Vec<Vec<usize>> = pick
            .iter()
            .zip(&per_segment)
            .map(|(&i, opts)| opts[i].clone())
            .collect();
        let candidate = query
            .with_order(&order)
            .expect("valid orderings are permutations");
        evaluated += 1;
        match CompiledQuery::new(&candidate, fed)?.run(max_rows) {
            None => over_budget += 1,
            Some(outcome) => {
                let current = OptimalOrder {
                    total_calls: outcome.calls.iter().map(|c| c.calls).sum(),
                    intermediate_total: outcome.intermediate_sizes.iter().sum(),
                    order,
                    orderings_evaluated: 0,
                    orderings_over_budget: 0,
                };
                if best.as_ref().is_none_or(|b| compare(&current, b).is_lt()) {
                    best = Some(current);
                }
            }
        }
        // advance the mixed-radix counter over segments
        let mut k = pick.len();
        loop {
            if k == 0 {
                let mut best = best.ok_or(SimError::BudgetExceeded { max_rows })?;
                best.orderings_evaluated = evaluated;
                best.orderings_over_budget = over_budget;
                return Ok(best);
            }
            k -= 1;
            pick[k] += 1;
            if pick[k] < per_segment[k].len() {
                break;
            }
            pick[k] = 0;
        }
    }
}

fn compare(a: &OptimalOrder, b: &OptimalOrder) -> Ordering {
    a.total_calls
        .cmp(&b.total_calls)
        .then(a.intermediate_total.cmp(&b.intermediate_total))
        .then_with(|| a.order.concat().cmp(&b.order.concat()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_query;

    fn iri(s: &str) -> GroundTerm {
        GroundTerm::iri(format!("http://ex.org/{s}"))
    }

    type Store<'a> = (&'a str, Vec<(&'a str, &'a str, GroundTerm)>);

    fn fed(stores: &[Store]) -> Federation {
        let mut fed = Federation::new();
        for (endpoint, triples) in stores {
            fed.add_store(
                endpoint,
                triples.iter().map(|(s, p, o)| (iri(s), iri(p), o.clone())),
            )
            .unwrap();
        }
        fed
    }

    const PREFIX: &str = "PREFIX : <http://ex.org/>\n";

    fn query(body: &str) -> FederatedQuery {
        parse_query(&format!("{PREFIX}SELECT * WHERE {{ {body} }}")).unwrap()
    }

    #[test]
    fn scan_is_one_call() {
        let f = fed(&[(
            "http://e",
            vec![
                ("a", "p", iri("x")),
                ("b", "p", iri("y")),
                ("c", "q", iri("z")),
            ],
        )]);
        let r = evaluate_sequence(&query("SERVICE <http://e> { ?s ?p ?o }"), &f).unwrap();
        assert_eq!(r.solutions.len(), 3);
        assert_eq!(r.total_calls, 1);
        assert_eq!(r.intermediate_sizes, vec![3]);
    }

    #[test]
    fn bind_join_counts_distinct_projections() {
        let f = fed(&[
            (
                "http://e1",
                vec![
                    ("a", "p", iri("x")),
                    ("b", "p", iri("x")),
                    ("c", "p", iri("y")),
                ],
            ),
            (
                "http://e2",
                vec![("x", "q", iri("1")), ("y", "q", iri("2"))],
            ),
        ]);
        let q = query("SERVICE <http://e1> { ?s :p ?o } SERVICE <http://e2> { ?o :q ?v }");
        let r = evaluate_sequence(&q, &f).unwrap();
        assert_eq!(r.per_service_calls[1].calls, 2);
        assert_eq!(r.total_calls, 3);
        assert_eq!(r.solutions.len(), 3);

        let swapped = q.with_order(&[vec![1, 0]]).unwrap();
        let r2 = evaluate_sequence(&swapped, &f).unwrap();
        assert_eq!(r2.total_calls, 1 + 2);
        assert_eq!(r.sorted_solutions(), r2.sorted_solutions());
    }

    #[test]
    fn empty_intermediate_still_costs_one_call() {
        let f = fed(&[
            ("http://e1", vec![]),
            ("http://e2", vec![("x", "q", iri("1"))]),
        ]);
        let q = query("SERVICE <http://e1> { ?s :p ?o } SERVICE <http://e2> { ?o :q ?v }");
        let r = evaluate_sequence(&q, &f).unwrap();
        assert_eq!(r.total_calls, 2);
        assert!(r.solutions.is_empty());
    }

    #[test]
    fn variable_endpoints_dispatch_per_iri() {
        let f = fed(&[
            (
                "http://dir",
                vec![
                    ("r1", "at", GroundTerm::iri("http://src1")),
                    ("r2", "at", GroundTerm::iri("http://src2")),
                    ("r3", "at", GroundTerm::iri("http://gone")),
                ],
            ),
            (
                "http://src1",
                vec![("x", "name", GroundTerm::simple("one"))],
            ),
            (
                "http://src2",
                vec![
                    ("y", "name", GroundTerm::simple("two")),
                    ("z", "name", GroundTerm::simple("three")),
                ],
            ),
        ]);
        let q = query("SERVICE <http://dir> { ?r :at ?src } SERVICE ?src { ?thing :name ?n }");
        let r = evaluate_sequence(&q, &f).unwrap();
        assert_eq!(r.per_service_calls[1].calls, 3);
        assert_eq!(r.solutions.len(), 3);
    }

    #[test]
    fn optional_is_left_outer_join_over_the_group() {
        let f = fed(&[
            (
                "http://e1",
                vec![("a", "p", iri("x")), ("b", "p", iri("y"))],
            ),
            (
                "http://e2",
                vec![("x", "q", iri("1")), ("y", "q", iri("2"))],
            ),
            ("http://e3", vec![("1", "r", iri("ok"))]),
        ]);
        let q = query(
            "SERVICE <http://e1> { ?s :p ?o } OPTIONAL { SERVICE <http://e2> { ?o :q ?v } SERVICE <http://e3> { ?v :r ?w } }",
        );
        let r = evaluate_sequence(&q, &f).unwrap();
        let sols = r.sorted_solutions();
        assert_eq!(sols.len(), 2);
        assert_eq!(sols[0].get("w"), Some(&iri("ok")));
        assert_eq!(sols[1].len(), 2, "b keeps only ?s ?o: {sols:?}");
        assert_eq!(r.intermediate_sizes, vec![2, 2, 2]);
    }

    #[test]
    fn filters_literals_and_blank_nodes() {
        let int = |n: i64| GroundTerm::typed(n.to_string(), &format!("{XSD}integer"));
        let f = fed(&[(
            "http://e",
            vec![
                ("a", "age", int(30)),
                ("b", "age", int(12)),
                ("a", "name", GroundTerm::simple("Ann")),
                ("b", "name", GroundTerm::simple("Bob")),
            ],
        )]);
        let r = evaluate_sequence(
            &query("SERVICE <http://e> { ?s :age ?a FILTER (?a > 18) }"),
            &f,
        )
        .unwrap();
        assert_eq!(r.solutions.len(), 1);
        let r = evaluate_sequence(&query("SERVICE <http://e> { ?s :age 12 }"), &f).unwrap();
        assert_eq!(r.solutions.len(), 1);
        let r = evaluate_sequence(
            &query("SERVICE <http://e> { _:x :name \"Ann\" . _:x :age ?a }"),
            &f,
        )
        .unwrap();
        assert_eq!(
            r.solutions,
            vec![Solution::from([("a".to_owned(), int(30))])]
        );
        let r = evaluate_sequence(
            &query("SERVICE <http://e> { ?s :name ?n FILTER regex(?n, \"o\") }"),
            &f,
        )
        .unwrap();
        assert_eq!(r.solutions.len(), 1);
    }

    #[test]
    fn sub_select_hides_inner_variables() {
        let f = fed(&[
            (
                "http://e1",
                vec![("a", "p", iri("x")), ("a", "p", iri("y"))],
            ),
            ("http://e2", vec![("x", "p", iri("k"))]),
        ]);
        let q = query(
            "SERVICE <http://e1> { SELECT ?s WHERE { ?s :p ?o } } SERVICE <http://e2> { ?o :p ?k }",
        );
        let r = evaluate_sequence(&q, &f).unwrap();
        // ?o inside the sub-select is not joined with the second service.
        assert_eq!(r.solutions.len(), 2);
        assert!(r.solutions.iter().all(|s| s.get("o") == Some(&iri("x"))));
    }

    #[test]
    fn errors() {
        let f = fed(&[("http://e", vec![])]);
        let err =
            evaluate_sequence(&query("SERVICE <http://nowhere> { ?s ?p ?o }"), &f).unwrap_err();
        assert!(matches!(err, SimError::UnknownEndpoint(e) if e == "http://nowhere"));
        assert!(
            evaluate_sequence(&query("SERVICE SILENT <http://nowhere> { ?s ?p ?o }"), &f).is_ok()
        );
        let err = evaluate_sequence(
            &query("SERVICE <http://e> { ?s ?p ?o FILTER (bound(?s)) }"),
            &f,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::UnsupportedFilter(_)));
        let q = parse_query("SELECT * WHERE { SERVICE <http://e> { ?s foaf:name ?o } }").unwrap();
        assert!(matches!(
            evaluate_sequence(&q, &f),
            Err(SimError::UndeclaredPrefix(_))
        ));
    }

    #[test]
    fn optimal_order_prefers_fewer_calls() {
        let f = fed(&[
            (
                "http://e1",
                vec![
                    ("a", "p", iri("x")),
                    ("b", "p", iri("y")),
                    ("c", "p", iri("z")),
                ],
            ),
            ("http://e2", vec![("x", "q", iri("1"))]),
        ]);
        let q = query("SERVICE <http://e1> { ?s :p ?o } SERVICE <http://e2> { ?o :q ?v }");
        let best = simulated_optimal(&q, &f, 9).unwrap();
        assert_eq!(best.order, vec![vec![1, 0]]);
        assert_eq!(best.total_calls, 2);
        assert_eq!(best.orderings_evaluated, 2);
        assert!(matches!(
            simulated_optimal(&q, &f, 1),
            Err(SimError::Plan(_))
        ));
        let bounded = simulated_optimal_bounded(&q, &f, 9, 2).unwrap();
        assert_eq!(bounded.orderings_over_budget, 1);
        assert_eq!(bounded.order, vec![vec![1, 0]]);
        assert!(matches!(
            simulated_optimal_bounded(&q, &f, 9, 0),
            Err(SimError::BudgetExceeded { max_rows: 0 })
        ));
        assert!(
            evaluate_sequence_bounded(&q.with_order(&[vec![1, 0]]).unwrap(), &f, 2)
                .unwrap()
                .is_some()
        );
        assert!(
            evaluate_sequence_bounded(&q.with_order(&[vec![0, 1]]).unwrap(), &f, 2)
                .unwrap()
                .is_none()
        );
    }
}
