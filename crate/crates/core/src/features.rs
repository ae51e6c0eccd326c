//! The joint query/document feature map: rank-threshold indicators for each
//! base ranking followed by sparse term/document indicators.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

/// Rank cutoffs 1..=10, then every 5 up to 100.
pub const THRESHOLDS: [u32; 28] = [
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 85, 90, 95, 100,
];

pub const RANK_FEATURES: usize = THRESHOLDS.len();

pub type FeatureId = u32;

/// Indicator vector for a document's rank in one base ranking; all zeros when
/// the document is not ranked (or ranked beyond the last threshold).
pub fn phi_rank(rank: Option<u32>) -> [f64; RANK_FEATURES] {
    let mut out = [0.0; RANK_FEATURES];
    if let Some(rank) = rank.filter(|&r| r >= 1) {
        for (slot, &tau) in out.iter_mut().zip(THRESHOLDS.iter()) {
            if rank <= tau {
                *slot = 1.0;
            }
        }
    }
    out
}

/// Sparse vector with ids strictly increasing and no zero values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(FeatureId, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from arbitrary pairs: duplicates are summed and zeros dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (FeatureId, f64)>) -> Self {
        let mut pairs: Vec<_> = pairs.into_iter().collect();
        pairs.sort_by_key(|&(id, _)| id);
        let mut entries: Vec<(FeatureId, f64)> = Vec::with_capacity(pairs.len());
        for (id, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == id => last.1 += v,
                _ => entries.push((id, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        SparseVector { entries }
    }

    pub fn entries(&self) -> &[(FeatureId, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// One past the largest id, or 0 for the zero vector.
    pub fn min_dim(&self) -> usize {
        self.entries.last().map_or(0, |&(id, _)| id as usize + 1)
    }

    pub fn get(&self, id: FeatureId) -> f64 {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .map_or(0.0, |i| self.entries[i].1)
    }

    /// Dot product with a dense vector; ids past its end contribute zero.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(id, v)| dense.get(id as usize).map_or(0.0, |w| w * v))
            .sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    pub fn sub(&self, other: &SparseVector) -> SparseVector {
        let mut out = Vec::with_capacity(self.nnz() + other.nnz());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() || j < b.len() {
            let pick = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) if x.0 == y.0 => {
                    i += 1;
                    j += 1;
                    (x.0, x.1 - y.1)
                }
                (Some(x), Some(y)) if x.0 < y.0 => {
                    i += 1;
                    *x
                }
                (Some(x), None) => {
                    i += 1;
                    *x
                }
                (_, Some(y)) => {
                    j += 1;
                    (y.0, -y.1)
                }
                (None, None) => unreachable!(),
            };
            if pick.1 != 0.0 {
                out.push(pick);
            }
        }
        SparseVector { entries: out }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim.max(self.min_dim())];
        for &(id, v) in &self.entries {
            out[id as usize] = v;
        }
        out
    }

    pub fn scale(&self, factor: f64) -> SparseVector {
        SparseVector::from_pairs(self.entries.iter().map(|&(id, v)| (id, v * factor)))
    }
}

/// Feature-id layout. Rank blocks occupy ids `0..28·|F|`; term/document
/// pairs get ids after that in order of first sight.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureSpace {
    base_functions: Vec<String>,
    term_docs: Vec<(String, String)>,
    index: HashMap<(String, String), FeatureId>,
}

impl FeatureSpace {
    pub fn new(base_functions: Vec<String>) -> Self {
        FeatureSpace {
            base_functions,
            ..Default::default()
        }
    }

    /// The usual single-baseline space.
    pub fn single(base_function: &str) -> Self {
        Self::new(vec![base_function.to_owned()])
    }

    pub fn base_functions(&self) -> &[String] {
        &self.base_functions
    }

    pub fn thresholds(&self) -> &'static [u32] {
        &THRESHOLDS
    }

    pub fn rank_dims(&self) -> usize {
        RANK_FEATURES * self.base_functions.len()
    }

    pub fn rank_block(&self, function: usize) -> std::ops::Range<usize> {
        let start = function * RANK_FEATURES;
        start..start + RANK_FEATURES
    }

    pub fn dim(&self) -> usize {
        self.rank_dims() + self.term_docs.len()
    }

    pub fn term_doc_count(&self) -> usize {
        self.term_docs.len()
    }

    pub fn term_doc_id(&self, term: &str, doc: &str) -> Option<FeatureId> {
        self.index.get(&(term.to_owned(), doc.to_owned())).copied()
    }

    /// Id of a term/document pair, assigning the next id on first sight.
    pub fn intern(&mut self, term: &str, doc: &str) -> FeatureId {
        let key = (term.to_owned(), doc.to_owned());
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = (self.rank_dims() + self.term_docs.len()) as FeatureId;
        self.term_docs.push(key.clone());
        self.index.insert(key, id);
        id
    }

    pub fn term_doc(&self, id: FeatureId) -> Option<(&str, &str)> {
        let offset = (id as usize).checked_sub(self.rank_dims())?;
        self.term_docs.get(offset).map(|(t, d)| (t.as_str(), d.as_str()))
    }

    /// Term/document pairs in id order.
    pub fn term_docs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.term_docs.iter().map(|(t, d)| (t.as_str(), d.as_str()))
    }
}

fn distinct(terms: &[String]) -> BTreeSet<&str> {
    terms.iter().map(String::as_str).collect()
}

/// Term/document indicators for `doc` under `query_terms`, growing the space
/// for unseen pairs. One feature per distinct term.
pub fn phi_terms(space: &mut FeatureSpace, doc: &str, query_terms: &[String]) -> SparseVector {
    let ids: Vec<_> = distinct(query_terms)
        .into_iter()
        .map(|t| (space.intern(t, doc), 1.0))
        .collect();
    SparseVector::from_pairs(ids)
}

/// As [`phi_terms`] against a frozen space: pairs the space has never seen
/// are omitted (their weight is zero in any model over this space).
pub fn phi_terms_frozen(space: &FeatureSpace, doc: &str, query_terms: &[String]) -> SparseVector {
    SparseVector::from_pairs(
        distinct(query_terms)
            .into_iter()
            .filter_map(|t| space.term_doc_id(t, doc).map(|id| (id, 1.0))),
    )
}

fn rank_pairs(space: &FeatureSpace, base_ranks: &[Option<u32>]) -> Vec<(FeatureId, f64)> {
    assert_eq!(
        base_ranks.len(),
        space.base_functions().len(),
        "one rank (or None) per base function"
    );
    let mut pairs = Vec::new();
    for (f, &rank) in base_ranks.iter().enumerate() {
        let offset = space.rank_block(f).start;
        for (i, v) in phi_rank(rank).into_iter().enumerate() {
            if v != 0.0 {
                pairs.push(((offset + i) as FeatureId, v));
            }
        }
    }
    pairs
}

/// Full joint feature vector; `base_ranks[f]` is the document's rank under
/// base function `f`.
pub fn phi(space: &mut FeatureSpace, doc: &str, query_terms: &[String], base_ranks: &[Option<u32>]) -> SparseVector {
    let mut pairs = rank_pairs(space, base_ranks);
    pairs.extend(phi_terms(space, doc, query_terms).entries().iter().copied());
    SparseVector::from_pairs(pairs)
}

pub fn phi_frozen(space: &FeatureSpace, doc: &str, query_terms: &[String], base_ranks: &[Option<u32>]) -> SparseVector {
    let mut pairs = rank_pairs(space, base_ranks);
    pairs.extend(phi_terms_frozen(space, doc, query_terms).entries().iter().copied());
    SparseVector::from_pairs(pairs)
}
