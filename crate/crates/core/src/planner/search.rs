//! Search over orderings of one segment with interned variables.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::cost::{tie_break_score, CostConfig, CostProfile, CostTerm};
use crate::model::{exposed_variables, BindingSet, QuerySegment, ServicePattern};

use super::{sequence_weights, PlanError};

/// Bit set over interned variable ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct VarMask(Vec<u64>);

impl VarMask {
    fn with_capacity(vars: usize) -> Self {
        Self(vec![0; vars.div_ceil(64).max(1)])
    }

    fn insert(&mut self, id: usize) {
        self.0[id / 64] |= 1 << (id % 64);
    }

    fn contains(&self, id: usize) -> bool {
        self.0[id / 64] & (1 << (id % 64)) != 0
    }

    fn union_into(&self, other: &VarMask, out: &mut VarMask) {
        for ((o, a), b) in out.0.iter_mut().zip(&self.0).zip(&other.0) {
            *o = a | b;
        }
    }
}

struct CompiledService {
    profile: CostProfile,
    /// Interned id per profile term; `None` for blank nodes.
    term_ids: Vec<Option<usize>>,
    exposes: VarMask,
    requires: Option<usize>,
    tie_break: usize,
    original_index: usize,
}

impl CompiledService {
    fn cost(&self, bound: &VarMask) -> f64 {
        self.profile
            .evaluate(|i| self.term_ids[i].is_some_and(|id| bound.contains(id)))
    }
}

pub(crate) struct CompiledSegment<'a> {
    pub services: &'a [ServicePattern],
    compiled: Vec<CompiledService>,
    initial: VarMask,
    weights: Vec<f64>,
}

/// Relative tolerance under which two sequence costs count as tied.
pub(crate) fn costs_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

impl<'a> CompiledSegment<'a> {
    pub fn new(segment: &'a QuerySegment, config: &CostConfig, initial: &BindingSet) -> Self {
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut intern = |name: &str| {
            let next = ids.len();
            *ids.entry(name.to_owned()).or_insert(next)
        };
        let exposed: Vec<_> = segment.services.iter().map(exposed_variables).collect();
        let initial_ids: Vec<usize> = initial.iter().map(&mut intern).collect();
        let exposed_ids: Vec<Vec<usize>> = exposed
            .iter()
            .map(|vars| vars.iter().map(|v| intern(v)).collect())
            .collect();
        let profiles: Vec<CostProfile> = segment
            .services
            .iter()
            .map(|s| CostProfile::new(s, config))
            .collect();
        let term_ids: Vec<Vec<Option<usize>>> = profiles
            .iter()
            .map(|p| {
                p.terms
                    .iter()
                    .map(|(term, _)| match term {
                        CostTerm::Variable(name) => Some(intern(name)),
                        CostTerm::Blank(_) => None,
                    })
                    .collect()
            })
            .collect();
        let requires: Vec<Option<usize>> = segment
            .services
            .iter()
            .map(|s| s.endpoint_variable().map(&mut intern))
            .collect();

        let var_count = ids.len();
        let mut initial_mask = VarMask::with_capacity(var_count);
        for id in initial_ids {
            initial_mask.insert(id);
        }
        let compiled = profiles
            .into_iter()
            .zip(term_ids)
            .zip(exposed_ids)
            .zip(requires)
            .zip(&segment.services)
            .map(|((((profile, term_ids), exposed), requires), service)| {
                let mut exposes = VarMask::with_capacity(var_count);
                for id in exposed {
                    exposes.insert(id);
                }
                CompiledService {
                    profile,
                    term_ids,
                    exposes,
                    requires,
                    tie_break: tie_break_score(service),
                    original_index: service.original_index,
                }
            })
            .collect();
        let weights = if segment.services.is_empty() {
            Vec::new()
        } else {
            sequence_weights(segment.services.len()).expect("non-empty segment")
        };
        Self {
            services: &segment.services,
            compiled,
            initial: initial_mask,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.compiled.len()
    }

    fn eligible(&self, i: usize, bound: &VarMask) -> bool {
        self.compiled[i]
            .requires
            .is_none_or(|id| bound.contains(id))
    }

    /// Cost of each service given only the segment's initial bindings.
    pub fn isolated_costs(&self) -> Vec<f64> {
        self.compiled
            .iter()
            .map(|c| c.cost(&self.initial))
            .collect()
    }

    /// Cost of each service (by position) and the sequence total for `order`.
    pub fn costs_in_order(&self, order: &[usize]) -> (Vec<f64>, f64) {
        let mut bound = self.initial.clone();
        let mut next = bound.clone();
        let mut total = 0.0;
        let mut costs = vec![0.0; self.len()];
        for (depth, &i) in order.iter().enumerate() {
            let c = self.compiled[i].cost(&bound);
            costs[i] = c;
            total += c * self.weights[depth];
            bound.union_into(&self.compiled[i].exposes, &mut next);
            std::mem::swap(&mut bound, &mut next);
        }
        (costs, total)
    }

    pub fn tie_break(&self, i: usize) -> usize {
        self.compiled[i].tie_break
    }

    pub fn original_index(&self, i: usize) -> usize {
        self.compiled[i].original_index
    }

    /// Visits every ordering that satisfies endpoint-variable dependencies,
    /// in lexicographic order of positions, with its sequence cost.
    pub fn for_each_valid(&self, mut visit: impl FnMut(&[usize], f64)) {
        let n = self.len();
        if n == 0 {
            return;
        }
        let mut masks = vec![self.initial.clone(); n + 1];
        let mut prefix = vec![0.0; n + 1];
        let mut order = Vec::with_capacity(n);
        let mut used = vec![false; n];
        self.descend(
            0,
            &mut masks,
            &mut prefix,
            &mut order,
            &mut used,
            &mut visit,
        );
    }

    fn descend(
        &self,
        depth: usize,
        masks: &mut [VarMask],
        prefix: &mut [f64],
        order: &mut Vec<usize>,
        used: &mut [bool],
        visit: &mut impl FnMut(&[usize], f64),
    ) {
        let n = self.len();
        if depth == n {
            visit(order, prefix[n]);
            return;
        }
        for i in 0..n {
            if used[i] || !self.eligible(i, &masks[depth]) {
                continue;
            }
            let cost = self.compiled[i].cost(&masks[depth]);
            prefix[depth + 1] = prefix[depth] + cost * self.weights[depth];
            let (head, tail) = masks.split_at_mut(depth + 1);
            head[depth].union_into(&self.compiled[i].exposes, &mut tail[0]);
            used[i] = true;
            order.push(i);
            self.descend(depth + 1, masks, prefix, order, used, visit);
            order.pop();
            used[i] = false;
        }
    }

    /// Orders two tied orderings: more literals/filters earlier wins, then
    /// the lexicographically smaller sequence of original indices.
    pub fn tie_order(&self, a: &[usize], b: &[usize]) -> (Ordering, TieReason) {
        let tb = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| self.tie_break(y).cmp(&self.tie_break(x)))
            .find(|o| o.is_ne());
        if let Some(ordering) = tb {
            return (ordering, TieReason::LiteralsFilters);
        }
        let idx = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| self.original_index(x).cmp(&self.original_index(y)))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal);
        (idx, TieReason::OriginalOrder)
    }

    /// Picks one ordering per the greedy rule; VC's sort-and-repair is the
    /// same procedure because VC costs ignore bindings.
    pub fn greedy(&self) -> Result<(Vec<usize>, Option<TieReason>), PlanError> {
        let n = self.len();
        let mut bound = self.initial.clone();
        let mut next = bound.clone();
        let mut remaining: Vec<usize> = (0..n).collect();
        let mut order = Vec::with_capacity(n);
        let mut reason = None;
        while !remaining.is_empty() {
            let mut best: Option<(usize, f64)> = None;
            for (slot, &i) in remaining.iter().enumerate() {
                if !self.eligible(i, &bound) {
                    continue;
                }
                let cost = self.compiled[i].cost(&bound);
                let Some((best_slot, best_cost)) = best else {
                    best = Some((slot, cost));
                    continue;
                };
                let j = remaining[best_slot];
                let better = if costs_tie(cost, best_cost) {
                    let by_tb = self.tie_break(i).cmp(&self.tie_break(j));
                    let by_idx = self.original_index(j).cmp(&self.original_index(i));
                    let why = if by_tb.is_ne() {
                        TieReason::LiteralsFilters
                    } else {
                        TieReason::OriginalOrder
                    };
                    reason = Some(strongest(reason, why));
                    by_tb.then(by_idx).is_gt()
                } else {
                    cost < best_cost
                };
                if better {
                    best = Some((slot, cost));
                }
            }
            let Some((slot, _)) = best else {
                return Err(self.unsatisfiable(&remaining, &bound));
            };
            let i = remaining.remove(slot);
            bound.union_into(&self.compiled[i].exposes, &mut next);
            std::mem::swap(&mut bound, &mut next);
            order.push(i);
        }
        Ok((order, reason))
    }

    /// Exhaustive argmin with the whole-ordering tie-break. Returns the
    /// chosen positions and the full table of valid orderings.
    pub fn exhaustive(&self) -> Result<ExhaustiveOutcome, PlanError> {
        let mut table: Vec<(Vec<usize>, f64)> = Vec::new();
        self.for_each_valid(|order, cost| table.push((order.to_vec(), cost)));
        if table.is_empty() {
            return Err(self.unsatisfiable(&(0..self.len()).collect::<Vec<_>>(), &self.initial));
        }
        let min = table.iter().map(|(_, c)| *c).fold(f64::INFINITY, f64::min);
        let mut best: Option<usize> = None;
        let mut reason = None;
        for (k, (order, cost)) in table.iter().enumerate() {
            if !costs_tie(*cost, min) {
                continue;
            }
            match best {
                None => best = Some(k),
                Some(b) => {
                    let (ordering, why) = self.tie_order(order, &table[b].0);
                    reason = Some(strongest(reason, why));
                    if ordering.is_lt() {
                        best = Some(k);
                    }
                }
            }
        }
        let chosen = table[best.expect("table is non-empty")].0.clone();
        Ok(ExhaustiveOutcome {
            chosen,
            table,
            tie_reason: reason,
        })
    }

    fn unsatisfiable(&self, remaining: &[usize], bound: &VarMask) -> PlanError {
        // Report a blocked service whose variable nobody else can bind,
        // falling back to any blocked service (cyclic dependencies).
        let blocked: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !self.eligible(i, bound))
            .collect();
        let culprit = blocked
            .iter()
            .copied()
            .find(|&i| {
                let id = self.compiled[i]
                    .requires
                    .expect("blocked services have endpoint variables");
                !self.initial.contains(id)
                    && !(0..self.len()).any(|j| j != i && self.compiled[j].exposes.contains(id))
            })
            .or_else(|| blocked.first().copied())
            .unwrap_or(remaining[0]);
        let service = &self.services[culprit];
        PlanError::DependencyUnsatisfiable {
            original_index: service.original_index,
            variable: service.endpoint_variable().unwrap_or_default().to_owned(),
        }
    }
}

fn strongest(current: Option<TieReason>, new: TieReason) -> TieReason {
    match current {
        Some(TieReason::LiteralsFilters) => TieReason::LiteralsFilters,
        _ => new,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TieReason {
    LiteralsFilters,
    OriginalOrder,
}

pub(crate) struct ExhaustiveOutcome {
    pub chosen: Vec<usize>,
    pub table: Vec<(Vec<usize>, f64)>,
    pub tie_reason: Option<TieReason>,
}
