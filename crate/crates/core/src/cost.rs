//! Syntactic unrestrictiveness estimates for a `SERVICE` graph pattern.
//!
//! Four estimators, from coarse to fine:
//!
//! * **VC** counts the pattern's variables.
//! * **UVC** counts only variables not bound by earlier patterns.
//! * **WUVC** weights each unbound variable by its triple position.
//! * **JWUVC** divides the WUVC score by a join-shape factor.
//!
//! Lower is more restrictive, and more restrictive patterns should run first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BindingSet, Position, ServicePattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "vc", alias = "VC")]
    Vc,
    #[serde(rename = "uvc", alias = "UVC")]
    Uvc,
    #[serde(rename = "wuvc", alias = "WUVC")]
    Wuvc,
    #[serde(rename = "jwuvc", alias = "JWUVC")]
    Jwuvc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Vc, Method::Uvc, Method::Wuvc, Method::Jwuvc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Vc => "vc",
            Method::Uvc => "uvc",
            Method::Wuvc => "wuvc",
            Method::Jwuvc => "jwuvc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConfigError::UnknownMethod(s.to_owned()))
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown cost method {0:?} (expected vc, uvc, wuvc or jwuvc)")]
    UnknownMethod(String),
    #[error("weight {name} must be a finite non-negative number, got {value}")]
    InvalidWeight { name: &'static str, value: f64 },
    #[error("exhaustive_cap must be at least 1")]
    InvalidCap,
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Heuristic weights, estimator choice and the exhaustive-search size limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub method: Method,
    pub w_s: f64,
    pub w_p: f64,
    pub w_o: f64,
    pub j_star: f64,
    pub j_chain: f64,
    pub j_unusual: f64,
    /// Largest segment size searched exhaustively.
    pub exhaustive_cap: usize,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            method: Method::Jwuvc,
            w_s: 1.0,
            w_p: 0.1,
            w_o: 0.8,
            j_star: 0.5,
            j_chain: 0.6,
            j_unusual: 1.0,
            exhaustive_cap: 9,
        }
    }
}

impl CostConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let weights = [
            ("w_s", self.w_s),
            ("w_p", self.w_p),
            ("w_o", self.w_o),
            ("j_star", self.j_star),
            ("j_chain", self.j_chain),
            ("j_unusual", self.j_unusual),
        ];
        for (name, value) in weights {
            if !value.is_finite() || value < 0.0 {
                return Err(ConfigError::InvalidWeight { name, value });
            }
        }
        if self.exhaustive_cap == 0 {
            return Err(ConfigError::InvalidCap);
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Loads a JSON config file; absent keys keep their defaults.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config = Self::from_json(&text).map_err(|source| ConfigError::Json {
            path: path.display().to_string(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn position_weight(&self, position: Position) -> f64 {
        match position {
            Position::Subject => self.w_s,
            Position::Predicate => self.w_p,
            Position::Object => self.w_o,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct JoinCounts {
    pub star: usize,
    pub chain: usize,
    pub unusual: usize,
}

impl JoinCounts {
    pub fn is_empty(&self) -> bool {
        self.star + self.chain + self.unusual == 0
    }
}

/// A variable or blank node as seen by the cost formulas.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum CostTerm {
    Variable(String),
    /// Blank nodes count like variables but can never be bound.
    Blank(String),
}

fn cost_term(term: &crate::model::Term) -> Option<CostTerm> {
    if let Some(name) = term.variable_name() {
        Some(CostTerm::Variable(name.to_owned()))
    } else {
        term.blank_label().map(|l| CostTerm::Blank(l.to_owned()))
    }
}

/// Classifies every pair of occurrences of a shared variable (or blank
/// node) in two different triples: subject-subject and object-object are
/// star joins, subject-object chain joins, anything touching a predicate an
/// unusual join.
pub fn count_joins(service: &ServicePattern) -> JoinCounts {
    let mut occurrences: BTreeMap<CostTerm, Vec<(usize, Position)>> = BTreeMap::new();
    for (i, triple) in service.triples.iter().enumerate() {
        for (position, term) in triple.terms() {
            if let Some(key) = cost_term(term) {
                occurrences.entry(key).or_default().push((i, position));
            }
        }
    }
    let mut counts = JoinCounts::default();
    for occ in occurrences.values() {
        for (a, &(ta, pa)) in occ.iter().enumerate() {
            for &(tb, pb) in &occ[a + 1..] {
                if ta == tb {
                    continue;
                }
                match (pa, pb) {
                    (Position::Predicate, _) | (_, Position::Predicate) => counts.unusual += 1,
                    (Position::Subject, Position::Subject)
                    | (Position::Object, Position::Object) => counts.star += 1,
                    _ => counts.chain += 1,
                }
            }
        }
    }
    counts
}

/// Number of literal terms plus number of `FILTER`s. Higher is more selective.
pub fn tie_break_score(service: &ServicePattern) -> usize {
    service.literal_count() + service.filters.len()
}

/// Most restrictive of several positions: predicate, then object, then subject.
fn most_restrictive(positions: impl IntoIterator<Item = Position>) -> Position {
    positions
        .into_iter()
        .min_by_key(|p| match p {
            Position::Predicate => 0,
            Position::Object => 1,
            Position::Subject => 2,
        })
        .expect("a cost term occurs in at least one position")
}

/// Everything about a service the formulas need, precomputed once.
#[derive(Debug, Clone)]
pub(crate) struct CostProfile {
    pub method: Method,
    /// Cost terms in sorted order with their position weight.
    pub terms: Vec<(CostTerm, f64)>,
    pub denominator: f64,
}

impl CostProfile {
    pub fn new(service: &ServicePattern, config: &CostConfig) -> Self {
        let pattern_vars = service.pattern_variables();
        let mut positions: BTreeMap<CostTerm, Vec<Position>> = BTreeMap::new();
        for triple in &service.triples {
            for (position, term) in triple.terms() {
                match cost_term(term) {
                    Some(CostTerm::Variable(name)) if !pattern_vars.contains(&name) => {}
                    Some(key) => positions.entry(key).or_default().push(position),
                    None => {}
                }
            }
        }
        let terms = positions
            .into_iter()
            .map(|(key, ps)| {
                let weight = config.position_weight(most_restrictive(ps));
                (key, weight)
            })
            .collect();
        let joins = count_joins(service);
        let denominator = 1.0
            + joins.star as f64 * config.j_star
            + joins.chain as f64 * config.j_chain
            + joins.unusual as f64 * config.j_unusual;
        Self {
            method: config.method,
            terms,
            denominator,
        }
    }

    /// `is_bound(i)` reports whether `self.terms[i]` is already bound.
    pub fn evaluate(&self, is_bound: impl Fn(usize) -> bool) -> f64 {
        let unbound = || {
            self.terms
                .iter()
                .enumerate()
                .filter(|&(i, _)| !is_bound(i))
                .map(|(_, term)| term)
        };
        match self.method {
            Method::Vc => self.terms.len() as f64,
            Method::Uvc => unbound().count() as f64,
            Method::Wuvc => unbound().fold(0.0, |acc, (_, w)| acc + w),
            Method::Jwuvc => unbound().fold(0.0, |acc, (_, w)| acc + w) / self.denominator,
        }
    }
}

/// Cost of running `service` after the variables in `bound` are known.
pub fn unrestrictiveness(service: &ServicePattern, bound: &BindingSet, config: &CostConfig) -> f64 {
    let profile = CostProfile::new(service, config);
    profile.evaluate(|i| match &profile.terms[i].0 {
        CostTerm::Variable(name) => bound.contains(name),
        CostTerm::Blank(_) => false,
    })
}
