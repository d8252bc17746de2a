//! Heuristic reordering of `SERVICE` patterns in federated SPARQL queries.
//!
//! The crate parses a restricted SPARQL subset into a [`FederatedQuery`],
//! scores every `SERVICE` pattern with one of four syntactic
//! unrestrictiveness estimators, and searches for the cheapest ordering
//! (exhaustively or greedily). The [`sim`] module evaluates queries over an
//! in-memory federation and counts remote calls, which makes it possible to
//! check plans without any live endpoint.

pub mod cost;
pub mod model;
pub mod parser;
pub mod planner;
pub mod sim;
pub mod workload;

pub use cost::{
    count_joins, tie_break_score, unrestrictiveness, ConfigError, CostConfig, JoinCounts, Method,
};
pub use model::{
    exposed_variables, variable_positions, BindingSet, FederatedQuery, Position, QuerySegment,
    ServicePattern, Term, TermKind, TriplePattern,
};
pub use parser::{parse_query, serialize_query, ParseError, ParseErrorKind};
pub use planner::{
    auto_plan, exhaustive_plan, greedy_plan, plan_cost, segment_by_optional, sequence_cost,
    sequence_weights, valid_orderings, PlanError, PlanReport, Strategy,
};
