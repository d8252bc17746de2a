//! Seeded synthetic workloads: random queries for property checks, random
//! federations with matching queries for accuracy runs, and the planning
//! time sweep.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cost::{CostConfig, Method};
use crate::model::{FederatedQuery, ServicePattern};
use crate::parser::parse_query;
use crate::planner::{auto_plan, exhaustive_plan, greedy_plan, PlanError};
use crate::sim::{
    evaluate_sequence_bounded, simulated_optimal_bounded, Federation, GroundTerm, SimError,
};

pub const EXAMPLE_NS: &str = "http://example.org/";

/// Independent generator for item `index` of a run seeded with `seed`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Knobs for [`random_query`].
#[derive(Debug, Clone)]
pub struct QueryShape {
    pub max_triples: usize,
    pub variable_pool: usize,
    pub literal_rate: f64,
    pub filter_rate: f64,
    pub blank_rate: f64,
    pub variable_endpoint_rate: f64,
    pub optional_rate: f64,
}

impl Default for QueryShape {
    fn default() -> Self {
        Self {
            max_triples: 6,
            variable_pool: 6,
            literal_rate: 0.15,
            filter_rate: 0.15,
            blank_rate: 0.05,
            variable_endpoint_rate: 0.15,
            optional_rate: 0.2,
        }
    }
}

impl QueryShape {
    /// One segment, constant endpoints only.
    pub fn flat() -> Self {
        Self {
            variable_endpoint_rate: 0.0,
            optional_rate: 0.0,
            ..Self::default()
        }
    }
}

fn random_triples(rng: &mut impl Rng, shape: &QueryShape, out: &mut String) -> Vec<String> {
    let vars: Vec<String> = (0..shape.variable_pool.max(1))
        .map(|i| format!("?v{i}"))
        .collect();
    let count = rng.random_range(1..=shape.max_triples.max(1));
    let mut used = Vec::new();
    for _ in 0..count {
        let subject = match rng.random_range(0.0..1.0) {
            x if x < shape.blank_rate => format!("_:b{}", rng.random_range(0..2)),
            x if x < 0.8 => vars.choose(rng).unwrap().clone(),
            _ => format!(":e{}", rng.random_range(0..5)),
        };
        let predicate = match rng.random_range(0..10) {
            0 => vars.choose(rng).unwrap().clone(),
            1 => "a".to_owned(),
            _ => format!(":p{}", rng.random_range(0..6)),
        };
        let object = match rng.random_range(0.0..1.0) {
            x if x < shape.literal_rate => match rng.random_range(0..3) {
                0 => format!("\"lit{}\"", rng.random_range(0..4)),
                1 => rng.random_range(0..50).to_string(),
                _ => format!("\"txt{}\"@en", rng.random_range(0..3)),
            },
            x if x < shape.literal_rate + shape.blank_rate => {
                format!("_:b{}", rng.random_range(0..2))
            }
            x if x < 0.75 => vars.choose(rng).unwrap().clone(),
            _ => format!(":e{}", rng.random_range(0..5)),
        };
        for term in [&subject, &predicate, &object] {
            if term.starts_with('?') {
                used.push(term.clone());
            }
        }
        let _ = writeln!(out, "    {subject} {predicate} {object} .");
    }
    if let Some(var) = used.choose(rng) {
        if rng.random_bool(shape.filter_rate) {
            let _ = writeln!(out, "    FILTER ({var} != :e0)");
        }
    }
    used
}

/// Text of a random query with `services` SERVICE blocks.
pub fn random_query_text(rng: &mut impl Rng, services: usize, shape: &QueryShape) -> String {
    let mut text = format!("PREFIX : <{EXAMPLE_NS}>\nSELECT * WHERE {{\n");
    let optional_from = if services > 1 && rng.random_bool(shape.optional_rate) {
        rng.random_range(1..services)
    } else {
        services
    };
    let mut seen_vars: Vec<String> = Vec::new();
    for k in 0..services {
        if k == optional_from {
            text.push_str("  OPTIONAL {\n");
        }
        let endpoint = if !seen_vars.is_empty() && rng.random_bool(shape.variable_endpoint_rate) {
            seen_vars.choose(rng).unwrap().clone()
        } else {
            format!("<http://endpoint{}.example/sparql>", rng.random_range(0..4))
        };
        let mut body = String::new();
        let used = random_triples(rng, shape, &mut body);
        let _ = write!(text, "  SERVICE {endpoint} {{\n{body}  }}\n");
        seen_vars.extend(used);
    }
    if optional_from < services {
        text.push_str("  }\n");
    }
    text.push('}');
    text
}

pub fn random_query(rng: &mut impl Rng, services: usize, shape: &QueryShape) -> FederatedQuery {
    let text = random_query_text(rng, services, shape);
    parse_query(&text).unwrap_or_else(|e| panic!("generated query does not parse: {e}\n{text}"))
}

/// A random SERVICE block (constant endpoint).
pub fn random_service(rng: &mut impl Rng, shape: &QueryShape) -> ServicePattern {
    let shape = QueryShape {
        variable_endpoint_rate: 0.0,
        optional_rate: 0.0,
        ..shape.clone()
    };
    let mut query = random_query(rng, 1, &shape);
    query.segments.remove(0).services.remove(0)
}

/// Knobs for the accuracy corpus.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusConfig {
    pub seed: u64,
    pub instances: usize,
    pub min_services: usize,
    pub max_services: usize,
    pub min_store: usize,
    pub max_store: usize,
    pub literal_density: f64,
    pub variable_endpoint_rate: f64,
    /// Row budget per simulated ordering; orderings that exceed it are
    /// treated as never finishing.
    pub max_rows: usize,
}

/// Seed of the committed default corpus.
pub const DEFAULT_CORPUS_SEED: u64 = 20_240_527;

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_CORPUS_SEED,
            instances: 200,
            min_services: 2,
            max_services: 5,
            min_store: 100,
            max_store: 10_000,
            literal_density: 0.25,
            variable_endpoint_rate: 0.15,
            max_rows: 200_000,
        }
    }
}

/// A federation with a query whose answer is non-empty.
#[derive(Debug, Clone)]
pub struct Instance {
    pub index: usize,
    pub query: FederatedQuery,
    pub query_text: String,
    pub federation: Federation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ObjectKind {
    Entity,
    Class(usize),
    Literal(usize),
}

struct Predicate {
    name: String,
    kind: ObjectKind,
    share: f64,
    /// Subjects are drawn from the first `subject_range` entities.
    subject_range: usize,
}

fn iri(local: &str) -> GroundTerm {
    GroundTerm::iri(format!("{EXAMPLE_NS}{local}"))
}

fn endpoint_iri(k: usize) -> String {
    format!("{EXAMPLE_NS}endpoint/{k}")
}

/// Resampling attempts per instance before an oversized draw is kept.
const MAX_ATTEMPTS: u64 = 64;

/// Builds instance `index` of the corpus. Each instance has its own
/// generator stream, so instances can be built in any order. Draws whose
/// as-written order (always join-connected) needs more than a quarter of
/// the row budget are redrawn.
pub fn generate_instance(config: &CorpusConfig, index: usize) -> Instance {
    let mut attempt = 0;
    loop {
        let mut rng = item_rng(config.seed, ((index as u64) << 8) | attempt);
        let instance = draw_instance(config, index, &mut rng);
        attempt += 1;
        let fits =
            evaluate_sequence_bounded(&instance.query, &instance.federation, config.max_rows / 4)
                .ok()
                .flatten()
                .is_some();
        if fits || attempt == MAX_ATTEMPTS {
            return instance;
        }
    }
}

fn draw_instance(config: &CorpusConfig, index: usize, rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(config.min_services..=config.max_services.max(config.min_services));
    let entities = rng.random_range(50..=2000usize);
    let log_min = (config.min_store.max(1) as f64).ln();
    let log_max = (config.max_store.max(config.min_store).max(1) as f64).ln();

    // Schema: a few predicates per endpoint, each with its own object kind
    // and frequency so selectivities differ.
    let schemas: Vec<Vec<Predicate>> = (0..n)
        .map(|k| {
            (0..rng.random_range(2..=4))
                .map(|j| {
                    let kind = match rng.random_range(0.0..1.0) {
                        x if x < config.literal_density => {
                            ObjectKind::Literal(rng.random_range(2..=entities))
                        }
                        x if x < config.literal_density + 0.2 => {
                            ObjectKind::Class(rng.random_range(2..=12))
                        }
                        _ => ObjectKind::Entity,
                    };
                    Predicate {
                        name: format!("p{k}_{j}"),
                        kind,
                        share: rng.random_range(0.05..1.0),
                        subject_range: rng.random_range(entities / 10 + 1..=entities),
                    }
                })
                .collect()
        })
        .collect();

    // Query graph: each service is connected to an earlier one through a
    // shared variable; constant objects appear with some probability.
    let mut var_count = 0usize;
    let fresh = |count: &mut usize| {
        *count += 1;
        format!("v{}", *count - 1)
    };
    let mut services: Vec<Vec<(String, usize, Option<String>)>> = Vec::new(); // (subject var, predicate, object var)
    let mut constants: Vec<Vec<Option<GroundTerm>>> = Vec::new();
    let mut all_vars: Vec<String> = Vec::new();
    for (k, schema) in schemas.iter().enumerate() {
        let mut patterns = Vec::new();
        let mut consts = Vec::new();
        // Only variables that stand for entities may be shared; class and
        // literal objects stay private to their pattern.
        let mut local_vars: Vec<String> = Vec::new();
        for t in 0..rng.random_range(1..=3) {
            let subject = if t == 0 && k > 0 {
                all_vars.choose(rng).unwrap().clone()
            } else if t > 0 {
                local_vars.choose(rng).unwrap().clone()
            } else {
                fresh(&mut var_count)
            };
            let p = rng.random_range(0..schema.len());
            let (object, constant) = match schema[p].kind {
                ObjectKind::Entity => {
                    let reuse = !all_vars.is_empty() && rng.random_bool(0.3);
                    (
                        Some(if reuse {
                            all_vars.choose(rng).unwrap().clone()
                        } else {
                            fresh(&mut var_count)
                        }),
                        None,
                    )
                }
                ObjectKind::Class(_) | ObjectKind::Literal(_) if rng.random_bool(0.5) => {
                    (None, Some(()))
                }
                _ => (Some(fresh(&mut var_count)), None),
            };
            let entity_object = matches!(schema[p].kind, ObjectKind::Entity);
            for v in std::iter::once(&subject).chain(object.as_ref().filter(|_| entity_object)) {
                if !local_vars.contains(v) {
                    local_vars.push(v.clone());
                }
            }
            patterns.push((subject, p, object));
            consts.push(constant.map(|_| GroundTerm::simple("")));
        }
        for v in &local_vars {
            if !all_vars.contains(v) {
                all_vars.push(v.clone());
            }
        }
        services.push(patterns);
        constants.push(consts);
    }

    // Witness assignment, so the query has at least one answer.
    let witness: Vec<usize> = (0..var_count)
        .map(|_| rng.random_range(0..entities))
        .collect();
    let var_index = |v: &str| v[1..].parse::<usize>().unwrap();
    let object_term = |kind: ObjectKind, i: usize| match kind {
        ObjectKind::Entity => iri(&format!("e{i}")),
        ObjectKind::Class(c) => iri(&format!("C{}", i % c)),
        ObjectKind::Literal(c) => GroundTerm::simple(format!("name {}", i % c)),
    };

    let mut stores: Vec<Vec<(GroundTerm, GroundTerm, GroundTerm)>> = vec![Vec::new(); n];
    for k in 0..n {
        for (t, (subject, p, object)) in services[k].iter().enumerate() {
            let pred = &schemas[k][*p];
            let s = iri(&format!("e{}", witness[var_index(subject)]));
            let o = match object {
                Some(v) => object_term(pred.kind, witness[var_index(v)]),
                None => {
                    let c = object_term(pred.kind, rng.random_range(0..entities));
                    constants[k][t] = Some(c.clone());
                    c
                }
            };
            stores[k].push((s, iri(&pred.name), o));
        }
    }

    // Background data.
    for (k, schema) in schemas.iter().enumerate() {
        let size = (rng.random_range(log_min..=log_max)).exp().round() as usize;
        let total_share: f64 = schema.iter().map(|p| p.share).sum();
        for pred in schema {
            let count = ((size as f64) * pred.share / total_share).round().max(1.0) as usize;
            for _ in 0..count {
                let s = iri(&format!("e{}", rng.random_range(0..pred.subject_range)));
                let o = object_term(pred.kind, rng.random_range(0..entities));
                stores[k].push((s, iri(&pred.name), o));
            }
        }
    }

    // Optionally route one later service through a variable endpoint bound
    // by a directory triple in an earlier service.
    let mut endpoint_terms: Vec<String> =
        (0..n).map(|k| format!("<{}>", endpoint_iri(k))).collect();
    let mut directory: Option<(usize, String, String)> = None;
    if n >= 2 && rng.random_bool(config.variable_endpoint_rate) {
        let target = rng.random_range(1..n);
        let source = rng.random_range(0..target);
        let subject = services[source][0].0.clone();
        let src_var = fresh(&mut var_count);
        stores[source].push((
            iri(&format!("e{}", witness[var_index(&subject)])),
            iri("source"),
            GroundTerm::iri(endpoint_iri(target)),
        ));
        for _ in 0..entities / 4 {
            let dest = match rng.random_range(0..=n) {
                d if d == n => format!("{EXAMPLE_NS}missing"),
                d => endpoint_iri(d),
            };
            stores[source].push((
                iri(&format!("e{}", rng.random_range(0..entities))),
                iri("source"),
                GroundTerm::iri(dest),
            ));
        }
        endpoint_terms[target] = format!("?{src_var}");
        directory = Some((source, subject, src_var));
    }

    let mut text = format!("PREFIX : <{EXAMPLE_NS}>\nSELECT * WHERE {{\n");
    for k in 0..n {
        let _ = writeln!(text, "  SERVICE {} {{", endpoint_terms[k]);
        for (t, (subject, p, object)) in services[k].iter().enumerate() {
            let object = match object {
                Some(v) => format!("?{v}"),
                None => match constants[k][t].as_ref().unwrap() {
                    GroundTerm::Iri { iri } => format!(":{}", iri.trim_start_matches(EXAMPLE_NS)),
                    literal => literal.to_string(),
                },
            };
            let _ = writeln!(text, "    ?{subject} :{} {object} .", schemas[k][*p].name);
        }
        if let Some((source, subject, src_var)) = &directory {
            if *source == k {
                let _ = writeln!(text, "    ?{subject} :source ?{src_var} .");
            }
        }
        text.push_str("  }\n");
    }
    text.push('}');

    let query = parse_query(&text)
        .unwrap_or_else(|e| panic!("generated query does not parse: {e}\n{text}"));
    let mut federation = Federation::new();
    for (k, triples) in stores.into_iter().enumerate() {
        federation
            .add_store(&endpoint_iri(k), triples)
            .expect("endpoints are distinct");
    }
    Instance {
        index,
        query,
        query_text: text,
        federation,
    }
}

pub fn generate_corpus(config: &CorpusConfig) -> impl Iterator<Item = Instance> + '_ {
    (0..config.instances).map(move |i| generate_instance(config, i))
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodAccuracy {
    pub method: Method,
    pub strategy: String,
    pub hits: usize,
    pub instances: usize,
    pub hit_rate: f64,
    /// Instances where greedy's chosen cost ties exhaustive's.
    pub greedy_agreements: usize,
    pub greedy_agreement_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AccuracyReport {
    pub seed: u64,
    pub instances: usize,
    pub methods: Vec<MethodAccuracy>,
}

impl AccuracyReport {
    pub fn method(&self, method: Method, strategy: &str) -> Option<&MethodAccuracy> {
        self.methods
            .iter()
            .find(|m| m.method == method && m.strategy == strategy)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("instance {index}: {source}")]
    Sim { index: usize, source: SimError },
    #[error("instance {index}: {source}")]
    Plan { index: usize, source: PlanError },
}

/// Per-instance outcome used by [`accuracy`].
#[derive(Debug, Clone, Serialize)]
pub struct InstanceOutcome {
    pub index: usize,
    pub optimal_calls: usize,
    /// `(method, planner calls, greedy calls, costs agree)`; calls are
    /// `None` when the ordering blew the row budget.
    pub methods: Vec<(Method, Option<usize>, Option<usize>, bool)>,
}

pub fn evaluate_instance(
    instance: &Instance,
    config: &CostConfig,
    max_rows: usize,
) -> Result<InstanceOutcome, BenchError> {
    let sim = |source| BenchError::Sim {
        index: instance.index,
        source,
    };
    let plan = |source| BenchError::Plan {
        index: instance.index,
        source,
    };
    let fed = &instance.federation;
    let optimal = simulated_optimal_bounded(&instance.query, fed, config.exhaustive_cap, max_rows)
        .map_err(sim)?;
    let calls = |q: &FederatedQuery| -> Result<Option<usize>, BenchError> {
        Ok(evaluate_sequence_bounded(q, fed, max_rows)
            .map_err(sim)?
            .map(|r| r.total_calls))
    };
    let mut methods = Vec::new();
    for method in Method::ALL {
        let cfg = CostConfig {
            method,
            ..config.clone()
        };
        let (planned, report) = auto_plan(&instance.query, &cfg).map_err(plan)?;
        let (greedy, greedy_report) = greedy_plan(&instance.query, &cfg).map_err(plan)?;
        let planned_calls = calls(&planned)?;
        let greedy_calls = calls(&greedy)?;
        let agree = crate::planner::costs_agree(report.chosen_cost, greedy_report.chosen_cost);
        methods.push((method, planned_calls, greedy_calls, agree));
    }
    Ok(InstanceOutcome {
        index: instance.index,
        optimal_calls: optimal.total_calls,
        methods,
    })
}

/// Hit rates against the simulated optimum, per method, for the planner
/// (`auto`) and for greedy.
/// Instances are spread over all available cores; the report does not
/// depend on scheduling.
pub fn accuracy(corpus: &CorpusConfig, config: &CostConfig) -> Result<AccuracyReport, BenchError> {
    let outcomes = accuracy_outcomes(corpus, config)?;
    Ok(summarize(corpus.seed, &outcomes))
}

pub fn accuracy_outcomes(
    corpus: &CorpusConfig,
    config: &CostConfig,
) -> Result<Vec<InstanceOutcome>, BenchError> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(corpus.instances.max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<(usize, Result<InstanceOutcome, BenchError>)> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    scope.spawn(|| {
                        let mut done = Vec::new();
                        loop {
                            let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                            if i >= corpus.instances {
                                return done;
                            }
                            let instance = generate_instance(corpus, i);
                            done.push((i, evaluate_instance(&instance, config, corpus.max_rows)));
                        }
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker panicked"))
                .collect()
        });
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}

pub fn summarize(seed: u64, outcomes: &[InstanceOutcome]) -> AccuracyReport {
    let total = outcomes.len();
    let rate = |k: usize| {
        if total == 0 {
            1.0
        } else {
            k as f64 / total as f64
        }
    };
    let mut methods = Vec::new();
    for (m, method) in Method::ALL.into_iter().enumerate() {
        let agreements = outcomes.iter().filter(|o| o.methods[m].3).count();
        for (strategy, pick) in [("auto", 1usize), ("greedy", 2)] {
            let hits = outcomes
                .iter()
                .filter(|o| {
                    let calls = if pick == 1 {
                        o.methods[m].1
                    } else {
                        o.methods[m].2
                    };
                    calls == Some(o.optimal_calls)
                })
                .count();
            methods.push(MethodAccuracy {
                method,
                strategy: strategy.to_owned(),
                hits,
                instances: total,
                hit_rate: rate(hits),
                greedy_agreements: agreements,
                greedy_agreement_rate: rate(agreements),
            });
        }
    }
    AccuracyReport {
        seed,
        instances: total,
        methods,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub services: usize,
    pub exhaustive: Option<Duration>,
    pub greedy: Duration,
}

/// Best-of-`reps` planning time for a random single-segment query of each
/// size. Exhaustive is timed only up to `exhaustive_max`.
pub fn planning_sweep(
    sizes: impl IntoIterator<Item = usize>,
    exhaustive_max: usize,
    reps: usize,
    seed: u64,
    method: Method,
) -> Vec<TimingRow> {
    let shape = QueryShape::flat();
    sizes
        .into_iter()
        .map(|n| {
            let mut rng = item_rng(seed, n as u64);
            let query = random_query(&mut rng, n, &shape);
            let config = CostConfig {
                method,
                exhaustive_cap: n.max(1),
                ..CostConfig::default()
            };
            let best = |f: &dyn Fn()| {
                (0..reps.max(1))
                    .map(|_| {
                        let start = Instant::now();
                        f();
                        start.elapsed()
                    })
                    .min()
                    .unwrap()
            };
            let exhaustive = (n <= exhaustive_max).then(|| {
                best(&|| {
                    std::hint::black_box(exhaustive_plan(&query, &config).ok());
                })
            });
            let greedy = best(&|| {
                std::hint::black_box(greedy_plan(&query, &config).ok());
            });
            TimingRow {
                services: n,
                exhaustive,
                greedy,
            }
        })
        .collect()
}
