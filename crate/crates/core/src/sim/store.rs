//! In-memory triple stores keyed by endpoint IRI.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;

use super::ntriples::{parse_ntriples, Triple};
use super::term::GroundTerm;
use super::SimError;

pub type TermId = u32;

/// Interns ground terms shared by every store of a federation.
#[derive(Debug, Default, Clone)]
pub struct Dictionary {
    terms: Vec<GroundTerm>,
    ids: HashMap<GroundTerm, TermId>,
}

impl Dictionary {
    pub fn intern(&mut self, term: GroundTerm) -> TermId {
        if let Some(&id) = self.ids.get(&term) {
            return id;
        }
        let id = self.terms.len() as TermId;
        self.terms.push(term.clone());
        self.ids.insert(term, id);
        id
    }

    pub fn id(&self, term: &GroundTerm) -> Option<TermId> {
        self.ids.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &GroundTerm {
        &self.terms[id as usize]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// The data behind one endpoint: a set of triples with s/p/o indexes.
#[derive(Debug, Default, Clone)]
pub struct TripleStore {
    triples: Vec<[TermId; 3]>,
    index: [HashMap<TermId, Vec<u32>>; 3],
}

impl TripleStore {
    fn insert(&mut self, seen: &mut HashSet<[TermId; 3]>, triple: [TermId; 3]) {
        if !seen.insert(triple) {
            return;
        }
        let row = self.triples.len() as u32;
        self.triples.push(triple);
        for (index, id) in self.index.iter_mut().zip(triple) {
            index.entry(id).or_default().push(row);
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn rows(&self) -> &[[TermId; 3]] {
        &self.triples
    }

    /// Rows whose term at `position` (0 = s, 1 = p, 2 = o) is `id`.
    pub fn rows_with(&self, position: usize, id: TermId) -> &[u32] {
        self.index[position]
            .get(&id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Endpoint IRI to triple store, over one shared dictionary.
#[derive(Debug, Default, Clone)]
pub struct Federation {
    dictionary: Dictionary,
    stores: BTreeMap<String, TripleStore>,
}

impl Federation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a store. Duplicate triples collapse; a second store for the same
    /// endpoint is an error.
    pub fn add_store(
        &mut self,
        endpoint: &str,
        triples: impl IntoIterator<Item = Triple>,
    ) -> Result<(), SimError> {
        if self.stores.contains_key(endpoint) {
            return Err(SimError::DuplicateEndpoint(endpoint.to_owned()));
        }
        let mut store = TripleStore::default();
        let mut seen = HashSet::new();
        for (s, p, o) in triples {
            let ids = [
                self.dictionary.intern(s),
                self.dictionary.intern(p),
                self.dictionary.intern(o),
            ];
            store.insert(&mut seen, ids);
        }
        self.stores.insert(endpoint.to_owned(), store);
        Ok(())
    }

    pub fn store(&self, endpoint: &str) -> Option<&TripleStore> {
        self.stores.get(endpoint)
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &str> {
        self.stores.keys().map(String::as_str)
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// All triples of one endpoint as ground terms.
    pub fn triples(&self, endpoint: &str) -> Vec<Triple> {
        let Some(store) = self.stores.get(endpoint) else {
            return Vec::new();
        };
        store
            .rows()
            .iter()
            .map(|[s, p, o]| {
                (
                    self.dictionary.term(*s).clone(),
                    self.dictionary.term(*p).clone(),
                    self.dictionary.term(*o).clone(),
                )
            })
            .collect()
    }

    pub fn triple_count(&self) -> usize {
        self.stores.values().map(TripleStore::len).sum()
    }
}

/// Manifest entries in file order, duplicates kept.
struct ManifestEntries(Vec<(String, String)>);

impl<'de> Deserialize<'de> for ManifestEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = ManifestEntries;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object mapping endpoint IRIs to N-Triples paths")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::new();
                while let Some(entry) = map.next_entry::<String, String>()? {
                    entries.push(entry);
                }
                Ok(ManifestEntries(entries))
            }
        }
        deserializer.deserialize_map(EntriesVisitor)
    }
}

/// Loads a federation from a JSON manifest `{ "endpoint IRI": "file.nt" }`.
/// Relative paths resolve against the manifest's directory.
pub fn load_federation(manifest: &Path) -> Result<Federation, SimError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SimError::Io { path, source }
    };
    let text = std::fs::read_to_string(manifest).map_err(io(manifest))?;
    let entries: ManifestEntries = serde_json::from_str(&text).map_err(|e| SimError::Manifest {
        path: manifest.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = manifest.parent().unwrap_or(Path::new(""));
    let mut federation = Federation::new();
    for (endpoint, file) in entries.0 {
        if federation.store(&endpoint).is_some() {
            return Err(SimError::DuplicateEndpoint(endpoint));
        }
        let path = base.join(&file);
        let data = std::fs::read_to_string(&path).map_err(io(&path))?;
        let triples = parse_ntriples(&data).map_err(|e| SimError::NTriples {
            path: path.clone(),
            line: e.line,
            message: e.message,
        })?;
        federation.add_store(&endpoint, triples)?;
    }
    Ok(federation)
}
