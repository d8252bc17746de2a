//! Planner results checked against a brute-force scan over every
//! permutation, built only on the public cost and sequence functions.

use std::cmp::Ordering;

use fedreorder::planner::costs_agree;
use fedreorder::workload::{item_rng, random_query, QueryShape};
use fedreorder::{
    exhaustive_plan, exposed_variables, greedy_plan, parse_query, plan_cost, sequence_cost,
    serialize_query, tie_break_score, valid_orderings, BindingSet, CostConfig, FederatedQuery,
    Method, PlanError, ServicePattern,
};
use proptest::prelude::*;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for slot in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(slot, n - 1);
            out.push(p);
        }
    }
    out
}

fn respects_dependencies(order: &[&ServicePattern], initial: &BindingSet) -> bool {
    let mut bound = initial.clone();
    for s in order {
        if let Some(v) = s.endpoint_variable() {
            if !bound.contains(v) {
                return false;
            }
        }
        bound.extend(exposed_variables(s));
    }
    true
}

struct Scan {
    /// Per segment: valid orderings as originalIndex sequences with cost.
    segments: Vec<Vec<(Vec<usize>, f64)>>,
}

fn scan(query: &FederatedQuery, config: &CostConfig) -> Scan {
    let mut initial = BindingSet::new();
    let mut segments = Vec::new();
    for segment in &query.segments {
        let mut rows = Vec::new();
        for perm in permutations(segment.services.len()) {
            let order: Vec<&ServicePattern> = perm.iter().map(|&i| &segment.services[i]).collect();
            if respects_dependencies(&order, &initial) {
                let cost = sequence_cost(&order, config, &initial);
                rows.push((order.iter().map(|s| s.original_index).collect(), cost));
            }
        }
        for s in &segment.services {
            initial.extend(exposed_variables(s));
        }
        segments.push(rows);
    }
    Scan { segments }
}

/// The ordering the tie-break contract selects among minimum-cost rows.
fn expected_choice(query: &FederatedQuery, rows: &[(Vec<usize>, f64)]) -> Vec<usize> {
    let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let score =
        |idx: usize| tie_break_score(query.services().find(|s| s.original_index == idx).unwrap());
    rows.iter()
        .filter(|r| costs_agree(r.1, min))
        .min_by(|a, b| {
            let by_score =
                a.0.iter()
                    .zip(&b.0)
                    .map(|(&x, &y)| score(y).cmp(&score(x)))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal);
            by_score.then_with(|| a.0.cmp(&b.0))
        })
        .unwrap()
        .0
        .clone()
}

fn check_query(query: &FederatedQuery) -> Result<(), TestCaseError> {
    for method in Method::ALL {
        let config = CostConfig::with_method(method);
        let oracle = scan(query, &config);
        let satisfiable = oracle.segments.iter().all(|rows| !rows.is_empty());
        let exhaustive = exhaustive_plan(query, &config);
        let greedy = greedy_plan(query, &config);
        if !satisfiable {
            let both_refuse = matches!(exhaustive, Err(PlanError::DependencyUnsatisfiable { .. }))
                && matches!(greedy, Err(PlanError::DependencyUnsatisfiable { .. }));
            prop_assert!(both_refuse, "{method}: {exhaustive:?} / {greedy:?}");
            continue;
        }
        let (planned, report) = exhaustive.unwrap();
        let min: f64 = oracle
            .segments
            .iter()
            .map(|rows| rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min))
            .sum();
        prop_assert!(
            costs_agree(report.chosen_cost, min),
            "{method}: {} vs {min}",
            report.chosen_cost
        );
        prop_assert!(costs_agree(plan_cost(&planned, &config), min));
        let expected: Vec<Vec<usize>> = oracle
            .segments
            .iter()
            .map(|rows| expected_choice(query, rows))
            .collect();
        prop_assert_eq!(&report.chosen_order, &expected, "{}", method);
        if let Some(table) = report.permutation_table.as_ref() {
            prop_assert_eq!(
                table.len(),
                oracle.segments.iter().map(Vec::len).sum::<usize>()
            );
        }

        let (greedy_query, greedy_report) = greedy.unwrap();
        prop_assert!(
            greedy_report.chosen_cost >= min || costs_agree(greedy_report.chosen_cost, min)
        );
        let mut bound = BindingSet::new();
        for segment in &greedy_query.segments {
            let order: Vec<&ServicePattern> = segment.services.iter().collect();
            prop_assert!(respects_dependencies(&order, &bound));
            for s in &segment.services {
                bound.extend(exposed_variables(s));
            }
        }
    }
    Ok(())
}

fn query_from(seed: u64, services: usize) -> FederatedQuery {
    random_query(&mut item_rng(seed, 1), services, &QueryShape::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn planners_agree_with_brute_force(seed in any::<u64>(), n in 1usize..=6) {
        check_query(&query_from(seed, n))?;
    }

    #[test]
    fn valid_orderings_match_filtered_permutations(seed in any::<u64>(), n in 1usize..=5) {
        let query = query_from(seed, n);
        let oracle = scan(&query, &CostConfig::default());
        let mut initial = BindingSet::new();
        for (segment, rows) in query.segments.iter().zip(&oracle.segments) {
            let mut expected: Vec<Vec<usize>> = rows.iter().map(|r| r.0.clone()).collect();
            expected.sort();
            match valid_orderings(segment, &initial) {
                Ok(mut got) => {
                    got.sort();
                    prop_assert_eq!(got, expected);
                }
                Err(_) => prop_assert!(expected.is_empty()),
            }
            for s in &segment.services {
                initial.extend(exposed_variables(s));
            }
        }
    }

    #[test]
    fn planning_is_deterministic_and_idempotent(seed in any::<u64>(), n in 1usize..=6) {
        let query = query_from(seed, n);
        for method in Method::ALL {
            let config = CostConfig::with_method(method);
            for plan in [exhaustive_plan, greedy_plan] {
                let Ok((first, report)) = plan(&query, &config) else { continue };
                let (again, report_again) = plan(&query, &config).unwrap();
                prop_assert_eq!(&first, &again);
                prop_assert_eq!(&report.chosen_order, &report_again.chosen_order);

                let text = serialize_query(&first);
                let reparsed = parse_query(&text).unwrap();
                let (second, _) = plan(&reparsed, &config).unwrap();
                prop_assert_eq!(serialize_query(&second), text);
            }
        }
    }
}

#[test]
fn vc_sort_matches_enumeration_up_to_six_services() {
    for seed in 0..150u64 {
        let n = 1 + (seed % 6) as usize;
        let query = random_query(&mut item_rng(seed, 2), n, &QueryShape::flat());
        let config = CostConfig::with_method(Method::Vc);
        let oracle = scan(&query, &config);
        let min: f64 = oracle.segments[0]
            .iter()
            .map(|r| r.1)
            .fold(f64::INFINITY, f64::min);
        let (_, report) = exhaustive_plan(&query, &config).unwrap();
        assert!(costs_agree(report.chosen_cost, min), "seed {seed}");
        assert_eq!(
            report.chosen_order,
            vec![expected_choice(&query, &oracle.segments[0])],
            "seed {seed}"
        );
    }
}

#[test]
fn listing_orders() {
    let cases: [(&str, Method, Vec<usize>); 4] = [
        (
            include_str!("../../../fixtures/queries/listing2.rq"),
            Method::Vc,
            vec![1, 0],
        ),
        (
            include_str!("../../../fixtures/queries/listing3.rq"),
            Method::Uvc,
            vec![0, 2, 1],
        ),
        (
            include_str!("../../../fixtures/queries/listing4.rq"),
            Method::Wuvc,
            vec![2, 1, 0],
        ),
        (
            include_str!("../../../fixtures/queries/listing5.rq"),
            Method::Jwuvc,
            vec![2, 1, 0],
        ),
    ];
    for (text, method, order) in cases {
        let query = parse_query(text).unwrap();
        check_query(&query).unwrap();
        let (_, report) = exhaustive_plan(&query, &CostConfig::with_method(method)).unwrap();
        assert_eq!(report.chosen_order, vec![order], "{method}");
    }
    let listing6 = parse_query(include_str!("../../../fixtures/queries/listing6.rq")).unwrap();
    let (_, report) = greedy_plan(&listing6, &CostConfig::with_method(Method::Uvc)).unwrap();
    assert_eq!(report.chosen_order, vec![vec![1, 2, 0]]);
}

#[test]
fn committed_fixtures_pass_the_oracle() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/queries");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let query = parse_query(&std::fs::read_to_string(&path).unwrap()).unwrap();
        check_query(&query).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
