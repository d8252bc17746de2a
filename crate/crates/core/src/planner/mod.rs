//! Orders the `SERVICE` patterns of each segment by weighted sequence cost.
//!
//! The cost of an ordering `s_1..s_n` is `Σ cost(s_i | B_i) · w_i` with
//! `w_i = (n - i + 1) / n`, where `B_i` holds every variable exposed by the
//! services placed before `s_i` (plus those of earlier segments). Segments
//! are planned independently so nothing crosses an `OPTIONAL` boundary.

mod search;

use serde::Serialize;
use thiserror::Error;

use crate::cost::{tie_break_score, unrestrictiveness, CostConfig, Method};
use crate::model::{exposed_variables, BindingSet, FederatedQuery, QuerySegment, ServicePattern};
use search::{CompiledSegment, TieReason};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("sequence weights need at least one service")]
    EmptySequence,
    #[error(
        "segment {segment} has {services} SERVICE patterns, above the exhaustive cap of {cap}; \
         use the greedy strategy instead"
    )]
    ExhaustiveCapExceeded {
        segment: usize,
        services: usize,
        cap: usize,
    },
    #[error("SERVICE #{original_index} needs ?{variable} bound first, but no ordering binds it")]
    DependencyUnsatisfiable {
        original_index: usize,
        variable: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    Greedy,
    /// VC fast path: sort by cost and repair endpoint dependencies.
    Sort,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServiceCost {
    pub original_index: usize,
    pub segment: usize,
    /// Cost given only the bindings of earlier segments.
    pub cost: f64,
    /// Cost at its position in the chosen ordering.
    pub cost_in_plan: f64,
    pub tie_break: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationCost {
    pub segment: usize,
    pub order: Vec<usize>,
    pub cost: f64,
}

pub const CONSTRAINT_OPTIONAL: &str = "optional-segmentation";
pub const CONSTRAINT_ENDPOINT: &str = "endpoint-variable-dependency";
pub const CONSTRAINT_TIE_LITERALS: &str = "tie-break-literals-filters";
pub const CONSTRAINT_TIE_ORIGINAL: &str = "tie-break-original-order";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanReport {
    pub method: Method,
    pub strategy: Strategy,
    /// `originalIndex` values per segment, in chosen order.
    pub chosen_order: Vec<Vec<usize>>,
    pub chosen_cost: f64,
    pub per_service_costs: Vec<ServiceCost>,
    /// Every valid ordering with its cost; exhaustive search only.
    pub permutation_table: Option<Vec<PermutationCost>>,
    pub constraints_applied: Vec<String>,
}

/// `w_i = (n - i + 1) / n` for `i = 1..=n`.
pub fn sequence_weights(n: usize) -> Result<Vec<f64>, PlanError> {
    if n == 0 {
        return Err(PlanError::EmptySequence);
    }
    Ok((1..=n).map(|i| (n - i + 1) as f64 / n as f64).collect())
}

/// Weighted cost of running `order` left to right from `initial` bindings.
pub fn sequence_cost(order: &[&ServicePattern], config: &CostConfig, initial: &BindingSet) -> f64 {
    let Ok(weights) = sequence_weights(order.len()) else {
        return 0.0;
    };
    let mut bound = initial.clone();
    let mut total = 0.0;
    for (service, weight) in order.iter().zip(weights) {
        total += unrestrictiveness(service, &bound, config) * weight;
        bound.extend(exposed_variables(service));
    }
    total
}

/// Segments as parsed; `OPTIONAL` groups were split out at parse time.
pub fn segment_by_optional(query: &FederatedQuery) -> &[QuerySegment] {
    &query.segments
}

/// Bindings in force when each segment starts: everything exposed by the
/// services of all earlier segments.
pub fn segment_initial_bindings(query: &FederatedQuery) -> Vec<BindingSet> {
    let mut bound = BindingSet::new();
    query
        .segments
        .iter()
        .map(|segment| {
            let initial = bound.clone();
            for service in &segment.services {
                bound.extend(exposed_variables(service));
            }
            initial
        })
        .collect()
}

/// Sum of per-segment sequence costs for the query's current order.
pub fn plan_cost(query: &FederatedQuery, config: &CostConfig) -> f64 {
    query
        .segments
        .iter()
        .zip(segment_initial_bindings(query))
        .map(|(segment, initial)| {
            let order: Vec<&ServicePattern> = segment.services.iter().collect();
            sequence_cost(&order, config, &initial)
        })
        .sum()
}

/// Orderings (as `originalIndex` sequences) in which every `SERVICE ?v`
/// runs after something that binds `?v`, either earlier in the segment or in
/// `initial`.
pub fn valid_orderings(
    segment: &QuerySegment,
    initial: &BindingSet,
) -> Result<Vec<Vec<usize>>, PlanError> {
    let compiled = CompiledSegment::new(segment, &CostConfig::default(), initial);
    let mut orders = Vec::new();
    compiled.for_each_valid(|order, _| {
        orders.push(order.iter().map(|&i| compiled.original_index(i)).collect())
    });
    if orders.is_empty() && !segment.services.is_empty() {
        compiled.exhaustive()?;
    }
    Ok(orders)
}

/// Minimum-cost ordering of every segment.
///
/// VC costs do not depend on bindings, so without endpoint variables VC
/// takes the sort path instead of enumerating permutations.
pub fn exhaustive_plan(
    query: &FederatedQuery,
    config: &CostConfig,
) -> Result<(FederatedQuery, PlanReport), PlanError> {
    if config.method == Method::Vc && query.services().all(|s| s.endpoint_variable().is_none()) {
        return plan_with(query, config, Strategy::Sort);
    }
    for (k, segment) in query.segments.iter().enumerate() {
        if segment.services.len() > config.exhaustive_cap {
            return Err(PlanError::ExhaustiveCapExceeded {
                segment: k,
                services: segment.services.len(),
                cap: config.exhaustive_cap,
            });
        }
    }
    plan_with(query, config, Strategy::Exhaustive)
}

/// Repeatedly takes the cheapest eligible service given what is bound so far.
pub fn greedy_plan(
    query: &FederatedQuery,
    config: &CostConfig,
) -> Result<(FederatedQuery, PlanReport), PlanError> {
    plan_with(query, config, Strategy::Greedy)
}

/// Exhaustive when every segment fits the cap, greedy otherwise.
pub fn auto_plan(
    query: &FederatedQuery,
    config: &CostConfig,
) -> Result<(FederatedQuery, PlanReport), PlanError> {
    if fits_exhaustive(query, config) {
        exhaustive_plan(query, config)
    } else {
        greedy_plan(query, config)
    }
}

pub fn fits_exhaustive(query: &FederatedQuery, config: &CostConfig) -> bool {
    query
        .segments
        .iter()
        .all(|s| s.services.len() <= config.exhaustive_cap)
}

fn plan_with(
    query: &FederatedQuery,
    config: &CostConfig,
    strategy: Strategy,
) -> Result<(FederatedQuery, PlanReport), PlanError> {
    let mut reordered = query.clone();
    let mut chosen_order = Vec::new();
    let mut chosen_cost = 0.0;
    let mut per_service_costs = Vec::new();
    let mut table = (strategy == Strategy::Exhaustive).then(Vec::new);
    let mut tie_reason: Option<TieReason> = None;

    for (k, (segment, initial)) in query
        .segments
        .iter()
        .zip(segment_initial_bindings(query))
        .enumerate()
    {
        let compiled = CompiledSegment::new(segment, config, &initial);
        let (positions, reason) =
            match strategy {
                Strategy::Exhaustive => {
                    let outcome = compiled.exhaustive()?;
                    if let Some(table) = table.as_mut() {
                        table.extend(outcome.table.into_iter().map(|(order, cost)| {
                            PermutationCost {
                                segment: k,
                                order: order.iter().map(|&i| compiled.original_index(i)).collect(),
                                cost,
                            }
                        }));
                    }
                    (outcome.chosen, outcome.tie_reason)
                }
                Strategy::Greedy | Strategy::Sort => compiled.greedy()?,
            };
        tie_reason = match (tie_reason, reason) {
            (Some(TieReason::LiteralsFilters), _) => Some(TieReason::LiteralsFilters),
            (current, None) => current,
            (_, new) => new,
        };

        let isolated = compiled.isolated_costs();
        let (in_plan, cost) = compiled.costs_in_order(&positions);
        chosen_cost += cost;
        for &i in &positions {
            per_service_costs.push(ServiceCost {
                original_index: compiled.original_index(i),
                segment: k,
                cost: isolated[i],
                cost_in_plan: in_plan[i],
                tie_break: compiled.tie_break(i),
            });
        }
        chosen_order.push(
            positions
                .iter()
                .map(|&i| compiled.original_index(i))
                .collect(),
        );
        reordered.segments[k].services = positions
            .iter()
            .map(|&i| segment.services[i].clone())
            .collect();
    }

    let mut constraints_applied = Vec::new();
    if query.segments.len() > 1 || query.segments.iter().any(|s| s.inside_optional) {
        constraints_applied.push(CONSTRAINT_OPTIONAL.to_owned());
    }
    if query.services().any(|s| s.endpoint_variable().is_some()) {
        constraints_applied.push(CONSTRAINT_ENDPOINT.to_owned());
    }
    match tie_reason {
        Some(TieReason::LiteralsFilters) => {
            constraints_applied.push(CONSTRAINT_TIE_LITERALS.to_owned())
        }
        Some(TieReason::OriginalOrder) => {
            constraints_applied.push(CONSTRAINT_TIE_ORIGINAL.to_owned())
        }
        None => {}
    }

    let report = PlanReport {
        method: config.method,
        strategy,
        chosen_order,
        chosen_cost,
        per_service_costs,
        permutation_table: table,
        constraints_applied,
    };
    Ok((reordered, report))
}

/// Whether two sequence costs are equal up to rounding (relative 1e-9).
pub fn costs_agree(a: f64, b: f64) -> bool {
    search::costs_tie(a, b)
}

/// Literal and filter count of a service; re-exported for report consumers.
pub fn service_tie_break(service: &ServicePattern) -> usize {
    tie_break_score(service)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_query;

    fn listing(n: usize) -> FederatedQuery {
        let text = match n {
            1 => include_str!("../../../../fixtures/queries/listing1.rq"),
            2 => include_str!("../../../../fixtures/queries/listing2.rq"),
            3 => include_str!("../../../../fixtures/queries/listing3.rq"),
            4 => include_str!("../../../../fixtures/queries/listing4.rq"),
            5 => include_str!("../../../../fixtures/queries/listing5.rq"),
            6 => include_str!("../../../../fixtures/queries/listing6.rq"),
            _ => unreachable!(),
        };
        parse_query(text).unwrap()
    }

    fn order_of(q: &FederatedQuery, config: &CostConfig, greedy: bool) -> Vec<usize> {
        let (_, report) = if greedy {
            greedy_plan(q, config).unwrap()
        } else {
            exhaustive_plan(q, config).unwrap()
        };
        report.chosen_order.concat()
    }

    #[test]
    fn weights() {
        assert_eq!(sequence_weights(4).unwrap(), vec![1.0, 0.75, 0.5, 0.25]);
        assert_eq!(sequence_weights(1).unwrap(), vec![1.0]);
        let five = sequence_weights(5).unwrap();
        for (got, want) in five.iter().zip([1.0, 0.8, 0.6, 0.4, 0.2]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(sequence_weights(0), Err(PlanError::EmptySequence));
    }

    #[test]
    fn listing_two_sequence_costs() {
        let q = listing(2);
        let s = &q.segments[0].services;
        let vc = CostConfig::with_method(Method::Vc);
        let b0 = BindingSet::new();
        assert_eq!(sequence_cost(&[&s[1], &s[0]], &vc, &b0), 2.5);
        assert_eq!(sequence_cost(&[&s[0], &s[1]], &vc, &b0), 3.5);
        assert_eq!(sequence_cost(&[&s[0]], &vc, &b0), 3.0);
        assert_eq!(order_of(&q, &vc, false), vec![1, 0]);
    }

    #[test]
    fn listing_three_uvc() {
        let q = listing(3);
        let s = &q.segments[0].services;
        let uvc = CostConfig::with_method(Method::Uvc);
        let cost = sequence_cost(&[&s[0], &s[2], &s[1]], &uvc, &BindingSet::new());
        assert!((cost - (3.0 + 1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(order_of(&q, &uvc, false), vec![0, 2, 1]);
    }

    #[test]
    fn listing_three_greedy_matches_optimal_cost() {
        let q = listing(3);
        let uvc = CostConfig::with_method(Method::Uvc);
        let (_, greedy) = greedy_plan(&q, &uvc).unwrap();
        let (_, exhaustive) = exhaustive_plan(&q, &uvc).unwrap();
        // Greedy starts with the 2-variable pattern; the result ties the optimum.
        assert_eq!(greedy.chosen_order, vec![vec![1, 0, 2]]);
        assert!(costs_agree(greedy.chosen_cost, exhaustive.chosen_cost));
    }

    #[test]
    fn listing_four_wuvc() {
        assert_eq!(
            order_of(&listing(4), &CostConfig::with_method(Method::Wuvc), false),
            vec![2, 1, 0]
        );
    }

    #[test]
    fn listing_five_jwuvc() {
        let (_, report) =
            exhaustive_plan(&listing(5), &CostConfig::with_method(Method::Jwuvc)).unwrap();
        assert_eq!(report.chosen_order, vec![vec![2, 1, 0]]);
        let isolated: Vec<_> = {
            let mut c = report.per_service_costs.clone();
            c.sort_by_key(|c| c.original_index);
            c.into_iter().map(|c| c.cost).collect()
        };
        for (got, want) in isolated.iter().zip([1.0 / 1.5, 0.5, 0.05]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(report.permutation_table.as_ref().unwrap().len(), 6);
    }

    #[test]
    fn listing_six_greedy_uvc() {
        assert_eq!(
            order_of(&listing(6), &CostConfig::with_method(Method::Uvc), true),
            vec![1, 2, 0]
        );
    }

    #[test]
    fn listing_one_dependencies() {
        let q = listing(1);
        let orders = valid_orderings(&q.segments[0], &BindingSet::new()).unwrap();
        assert_eq!(orders.len(), 4);
        assert!(orders.iter().all(|o| o[0] != 2));
        for method in Method::ALL {
            let config = CostConfig::with_method(method);
            for greedy in [false, true] {
                assert_ne!(
                    order_of(&q, &config, greedy)[0],
                    2,
                    "{method} greedy={greedy}"
                );
            }
        }
    }

    #[test]
    fn unsatisfiable_endpoint_variable() {
        let q = parse_query("SELECT * WHERE { SERVICE ?x { ?s ?p ?o } }").unwrap();
        let expected = PlanError::DependencyUnsatisfiable {
            original_index: 0,
            variable: "x".into(),
        };
        assert_eq!(
            valid_orderings(&q.segments[0], &BindingSet::new()),
            Err(expected.clone())
        );
        let uvc = CostConfig::with_method(Method::Uvc);
        assert_eq!(exhaustive_plan(&q, &uvc).unwrap_err(), expected);
        assert_eq!(greedy_plan(&q, &uvc).unwrap_err(), expected);
    }

    #[test]
    fn earlier_segment_binds_endpoint_variable() {
        let q = parse_query(
            "SELECT * WHERE { SERVICE <http://a> { ?x :p ?src } OPTIONAL { SERVICE ?src { ?x :q ?y } } }",
        )
        .unwrap();
        let (_, report) = exhaustive_plan(&q, &CostConfig::default()).unwrap();
        assert_eq!(report.chosen_order, vec![vec![0], vec![1]]);
        assert!(report
            .constraints_applied
            .iter()
            .any(|c| c == CONSTRAINT_OPTIONAL));
        assert!(report
            .constraints_applied
            .iter()
            .any(|c| c == CONSTRAINT_ENDPOINT));
    }

    #[test]
    fn unconstrained_segment_has_all_permutations() {
        let q = listing(6);
        assert_eq!(
            valid_orderings(&q.segments[0], &BindingSet::new())
                .unwrap()
                .len(),
            6
        );
    }

    #[test]
    fn cap_is_enforced() {
        let q = listing(3);
        let config = CostConfig {
            exhaustive_cap: 2,
            ..CostConfig::with_method(Method::Uvc)
        };
        assert!(matches!(
            exhaustive_plan(&q, &config),
            Err(PlanError::ExhaustiveCapExceeded {
                services: 3,
                cap: 2,
                ..
            })
        ));
        assert!(greedy_plan(&q, &config).is_ok());
        let (_, report) = auto_plan(&q, &config).unwrap();
        assert_eq!(report.strategy, Strategy::Greedy);
    }

    #[test]
    fn segments_never_mix() {
        let q = parse_query(
            "SELECT * WHERE {
               SERVICE <http://a> { ?a ?b ?c }
               OPTIONAL { SERVICE <http://b> { ?x ?y ?z } }
               SERVICE <http://c> { ?s ?p ?o } SERVICE <http://d> { ?s a :T } }",
        )
        .unwrap();
        assert_eq!(segment_by_optional(&q).len(), 3);
        let (reordered, report) =
            exhaustive_plan(&q, &CostConfig::with_method(Method::Uvc)).unwrap();
        assert_eq!(report.chosen_order, vec![vec![0], vec![1], vec![3, 2]]);
        let flags: Vec<_> = reordered
            .segments
            .iter()
            .map(|s| s.inside_optional)
            .collect();
        assert_eq!(flags, vec![false, true, false]);
    }

    #[test]
    fn literal_tie_break_moves_selective_service_first() {
        let q = parse_query(
            r#"SELECT * WHERE { SERVICE <http://a> { ?x :p ?y } SERVICE <http://b> { ?z :q ?w ; :r "lit" } }"#,
        )
        .unwrap();
        let (_, report) = exhaustive_plan(&q, &CostConfig::with_method(Method::Vc)).unwrap();
        assert_eq!(report.strategy, Strategy::Sort);
        assert_eq!(report.chosen_order, vec![vec![1, 0]]);
        assert!(report
            .constraints_applied
            .iter()
            .any(|c| c == CONSTRAINT_TIE_LITERALS));
    }

    #[test]
    fn chosen_cost_recomputes() {
        for n in 1..=6 {
            let q = listing(n);
            for method in Method::ALL {
                let config = CostConfig::with_method(method);
                let (reordered, report) = exhaustive_plan(&q, &config).unwrap();
                assert_eq!(report.chosen_cost, plan_cost(&reordered, &config));
            }
        }
    }
}
