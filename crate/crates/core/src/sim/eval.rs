//! Bind-join evaluation of a query over a [`Federation`].

use std::collections::{BTreeMap, HashMap};

use crate::model::{FederatedQuery, ServicePattern, Term, TermKind};

use super::filter::{compile_filter, Filter};
use super::store::{Federation, TermId, TripleStore};
use super::term::{GroundTerm, TermResolver};
use super::{ServiceCalls, SimError};

type Row = Vec<Option<TermId>>;

#[derive(Debug, Clone, Copy)]
enum PatTerm {
    /// A constant; `None` when the federation never mentions it.
    Const(Option<TermId>),
    Slot(usize),
}

enum Endpoint<'f> {
    /// `None` for a `SILENT` service whose endpoint is not in the federation.
    Store(Option<&'f TripleStore>),
    Variable(usize),
}

struct CompiledService<'f> {
    original_index: usize,
    endpoint: Endpoint<'f>,
    patterns: Vec<[PatTerm; 3]>,
    /// Local row width: global slots followed by service-private ones.
    width: usize,
    /// Global slots visible outside the service.
    shared: Vec<usize>,
    filters: Vec<(Filter, Option<usize>)>,
}

pub(crate) struct CompiledQuery<'f> {
    fed: &'f Federation,
    names: Vec<String>,
    segments: Vec<(bool, Vec<CompiledService<'f>>)>,
}

pub(crate) struct Outcome {
    pub rows: Vec<Row>,
    pub calls: Vec<ServiceCalls>,
    pub intermediate_sizes: Vec<usize>,
}

impl<'f> CompiledQuery<'f> {
    pub fn new(query: &FederatedQuery, fed: &'f Federation) -> Result<Self, SimError> {
        let resolver = TermResolver::new(query.prefixes());
        let mut slots: BTreeMap<String, usize> = BTreeMap::new();
        let mut names = Vec::new();
        let mut global = |name: &str| -> usize {
            *slots.entry(name.to_owned()).or_insert_with(|| {
                names.push(name.to_owned());
                names.len() - 1
            })
        };
        // Assign global slots up front so every row has the same width.
        for service in query.services() {
            for var in service.pattern_variables() {
                global(&var);
            }
            if let Some(var) = service.endpoint_variable() {
                global(var);
            }
        }
        let width = names.len();
        let lookup = |name: &str| slots.get(name).copied();

        let mut segments = Vec::new();
        for segment in &query.segments {
            let services = segment
                .services
                .iter()
                .map(|service| compile_service(service, fed, &resolver, &lookup, width))
                .collect::<Result<Vec<_>, _>>()?;
            segments.push((segment.inside_optional, services));
        }
        Ok(Self {
            fed,
            names,
            segments,
        })
    }

    /// Runs the query; `None` once any intermediate result would exceed
    /// `max_rows` solutions.
    pub fn run(&self, max_rows: usize) -> Option<Outcome> {
        let mut rows: Vec<Row> = vec![vec![None; self.names.len()]];
        let mut calls = Vec::new();
        let mut sizes = Vec::new();
        for (optional, services) in &self.segments {
            let mut tagged: Vec<(usize, Row)> = rows.iter().cloned().enumerate().collect();
            for (k, service) in services.iter().enumerate() {
                let (next, n) = self.apply(service, tagged, max_rows)?;
                tagged = next;
                calls.push(ServiceCalls {
                    original_index: service.original_index,
                    calls: n,
                });
                if !(*optional && k + 1 == services.len()) {
                    sizes.push(tagged.len());
                }
            }
            if *optional && !services.is_empty() {
                rows = left_merge(rows, tagged);
                sizes.push(rows.len());
            } else {
                rows = tagged.into_iter().map(|(_, row)| row).collect();
            }
        }
        Some(Outcome {
            rows,
            calls,
            intermediate_sizes: sizes,
        })
    }

    /// Joins `omega` with one service; returns the new solutions and the
    /// number of remote calls made. Output keeps the order of `omega`.
    fn apply(
        &self,
        service: &CompiledService<'_>,
        omega: Vec<(usize, Row)>,
        max_rows: usize,
    ) -> Option<(Vec<(usize, Row)>, usize)> {
        match service.endpoint {
            Endpoint::Store(store) => {
                let mut groups: HashMap<Vec<Option<TermId>>, usize> = HashMap::new();
                let mut keys = Vec::new();
                let membership: Vec<usize> = omega
                    .iter()
                    .map(|(_, row)| {
                        let key: Vec<_> = service.shared.iter().map(|&s| row[s]).collect();
                        *groups.entry(key.clone()).or_insert_with(|| {
                            keys.push(key);
                            keys.len() - 1
                        })
                    })
                    .collect();
                let calls = keys.len().max(1);
                let results: Vec<Vec<Row>> = keys
                    .iter()
                    .map(|key| {
                        let mut init = vec![None; service.width];
                        for (&slot, &value) in service.shared.iter().zip(key) {
                            init[slot] = value;
                        }
                        match store {
                            Some(store) => self.matches(service, store, init, max_rows),
                            None => Some(vec![init]),
                        }
                    })
                    .collect::<Option<_>>()?;
                let mut out = Vec::new();
                for ((origin, row), group) in omega.into_iter().zip(membership) {
                    for m in &results[group] {
                        let mut next = row.clone();
                        for &slot in &service.shared {
                            next[slot] = m[slot];
                        }
                        out.push((origin, next));
                    }
                    if out.len() > max_rows {
                        return None;
                    }
                }
                Some((out, calls))
            }
            Endpoint::Variable(slot) => {
                let mut by_iri: HashMap<TermId, usize> = HashMap::new();
                let mut results: Vec<Vec<Row>> = Vec::new();
                let dict = self.fed.dictionary();
                for (_, row) in &omega {
                    let Some(id) = row[slot] else { continue };
                    let Some(iri) = dict.term(id).as_iri() else {
                        continue;
                    };
                    if by_iri.contains_key(&id) {
                        continue;
                    }
                    by_iri.insert(id, results.len());
                    let mut init = vec![None; service.width];
                    init[slot] = Some(id);
                    results.push(match self.fed.store(iri) {
                        Some(store) => self.matches(service, store, init, max_rows)?,
                        None => Vec::new(),
                    });
                }
                let mut out = Vec::new();
                for (origin, row) in omega {
                    let Some(&group) = row[slot].and_then(|id| by_iri.get(&id)) else {
                        continue;
                    };
                    for m in &results[group] {
                        let compatible = service
                            .shared
                            .iter()
                            .all(|&s| row[s].is_none() || m[s].is_none() || row[s] == m[s]);
                        if compatible {
                            let mut next = row.clone();
                            for &s in &service.shared {
                                next[s] = next[s].or(m[s]);
                            }
                            out.push((origin, next));
                        }
                    }
                    if out.len() > max_rows {
                        return None;
                    }
                }
                Some((out, by_iri.len()))
            }
        }
    }

    fn matches(
        &self,
        service: &CompiledService<'_>,
        store: &TripleStore,
        init: Row,
        max_rows: usize,
    ) -> Option<Vec<Row>> {
        let mut out = Vec::new();
        let mut used = vec![false; service.patterns.len()];
        let mut row = init;
        if !match_bgp(
            store,
            &service.patterns,
            &mut used,
            &mut row,
            &mut out,
            max_rows,
        ) {
            return None;
        }
        let dict = self.fed.dictionary();
        out.retain(|row| {
            service.filters.iter().all(|(filter, slot)| {
                filter.holds(slot.and_then(|s| row[s]).map(|id| dict.term(id)))
            })
        });
        Some(out)
    }

    pub fn ground(&self, rows: &[Row]) -> Vec<BTreeMap<String, GroundTerm>> {
        let dict = self.fed.dictionary();
        rows.iter()
            .map(|row| {
                row.iter()
                    .zip(&self.names)
                    .filter_map(|(value, name)| {
                        value.map(|id| (name.clone(), dict.term(id).clone()))
                    })
                    .collect()
            })
            .collect()
    }
}

fn compile_service<'f>(
    service: &ServicePattern,
    fed: &'f Federation,
    resolver: &TermResolver,
    global: &dyn Fn(&str) -> Option<usize>,
    width: usize,
) -> Result<CompiledService<'f>, SimError> {
    let shared_names = service.pattern_variables();
    let mut private: BTreeMap<String, usize> = BTreeMap::new();
    let mut slot_of = |key: String, shared: bool| -> usize {
        if shared {
            if let Some(slot) = global(&key) {
                return slot;
            }
        }
        let next = width + private.len();
        *private.entry(key).or_insert(next)
    };
    let mut compile_term = |term: &Term| -> Result<PatTerm, SimError> {
        Ok(match term.kind() {
            TermKind::Variable => {
                let name = term.variable_name().expect("variable term");
                PatTerm::Slot(slot_of(name.to_owned(), shared_names.contains(name)))
            }
            TermKind::BlankNode => PatTerm::Slot(slot_of(
                format!("_:{}", term.blank_label().unwrap_or("")),
                false,
            )),
            _ => {
                let ground = resolver.resolve(term)?.expect("constant term");
                PatTerm::Const(fed.dictionary().id(&ground))
            }
        })
    };
    let patterns = service
        .triples
        .iter()
        .map(|t| {
            Ok([
                compile_term(&t.subject)?,
                compile_term(&t.predicate)?,
                compile_term(&t.object)?,
            ])
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let filters = service
        .filters
        .iter()
        .map(|body| {
            let filter = compile_filter(body, resolver)?;
            let var = filter.variable();
            let slot = if shared_names.contains(var) {
                global(var)
            } else {
                private.get(var).copied()
            };
            Ok((filter, slot))
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let endpoint = match service.endpoint.kind() {
        TermKind::Variable => Endpoint::Variable(
            global(service.endpoint_variable().expect("variable")).expect("slot"),
        ),
        _ => {
            let iri = resolver
                .resolve(&service.endpoint)?
                .and_then(|t| t.as_iri().map(str::to_owned))
                .ok_or_else(|| SimError::UnknownEndpoint(service.endpoint.lexical().to_owned()))?;
            match fed.store(&iri) {
                Some(store) => Endpoint::Store(Some(store)),
                None if service.silent => Endpoint::Store(None),
                None => return Err(SimError::UnknownEndpoint(iri)),
            }
        }
    };
    let mut shared: Vec<usize> = shared_names.iter().filter_map(|n| global(n)).collect();
    shared.sort_unstable();
    Ok(CompiledService {
        original_index: service.original_index,
        endpoint,
        patterns,
        width: width + private.len(),
        shared,
        filters,
    })
}

/// Backtracking basic-graph-pattern matcher; picks the most selective
/// remaining pattern at each step. Returns `false` if more than `max_rows`
/// matches turn up.
/// Position and term used to pick candidate rows from the store index.
type Access = (usize, TermId);

fn match_bgp(
    store: &TripleStore,
    patterns: &[[PatTerm; 3]],
    used: &mut [bool],
    row: &mut Row,
    out: &mut Vec<Row>,
    max_rows: usize,
) -> bool {
    let value = |t: PatTerm, row: &Row| -> Option<Option<TermId>> {
        match t {
            PatTerm::Const(c) => Some(c),
            PatTerm::Slot(s) => row[s].map(Some),
        }
    };
    // (pattern, index access, candidate count)
    let mut best: Option<(usize, Option<Access>, usize)> = None;
    for (k, pattern) in patterns.iter().enumerate() {
        if used[k] {
            continue;
        }
        let mut choice: (Option<Access>, usize) = (None, store.len());
        for (pos, &t) in pattern.iter().enumerate() {
            match value(t, row) {
                Some(None) => return true,
                Some(Some(id)) => {
                    let n = store.rows_with(pos, id).len();
                    if n < choice.1 || choice.0.is_none() {
                        choice = (Some((pos, id)), n);
                    }
                }
                None => {}
            }
        }
        if best.is_none_or(|(_, _, n)| choice.1 < n) {
            best = Some((k, choice.0, choice.1));
        }
    }
    let Some((k, access, _)) = best else {
        out.push(row.clone());
        return out.len() <= max_rows;
    };
    let all_rows;
    let candidates: &[u32] = match access {
        Some((pos, id)) => store.rows_with(pos, id),
        None => {
            all_rows = (0..store.len() as u32).collect::<Vec<_>>();
            &all_rows
        }
    };
    used[k] = true;
    let pattern = patterns[k];
    let mut bound_here = Vec::with_capacity(3);
    for &r in candidates {
        let triple = store.rows()[r as usize];
        let mut ok = true;
        for (t, actual) in pattern.iter().zip(triple) {
            match *t {
                PatTerm::Const(c) => ok = c == Some(actual),
                PatTerm::Slot(s) => match row[s] {
                    Some(v) => ok = v == actual,
                    None => {
                        row[s] = Some(actual);
                        bound_here.push(s);
                    }
                },
            }
            if !ok {
                break;
            }
        }
        let within = !ok || match_bgp(store, patterns, used, row, out, max_rows);
        for s in bound_here.drain(..) {
            row[s] = None;
        }
        if !within {
            used[k] = false;
            return false;
        }
    }
    used[k] = false;
    true
}

/// Left outer join of `base` with the tagged extensions produced from it.
fn left_merge(base: Vec<Row>, extended: Vec<(usize, Row)>) -> Vec<Row> {
    let mut out = Vec::with_capacity(extended.len().max(base.len()));
    let mut ext = extended.into_iter().peekable();
    for (i, row) in base.into_iter().enumerate() {
        let mut any = false;
        while let Some((_, next)) = ext.next_if(|(origin, _)| *origin == i) {
            out.push(next);
            any = true;
        }
        if !any {
            out.push(row);
        }
    }
    out
}
