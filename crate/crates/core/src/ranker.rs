//! Reranking with a learned model, including documents the base ranking
//! never returned but the model associates with the query terms.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::RankedList;
use crate::features::{phi_frozen, THRESHOLDS};
use crate::model::Model;

const RANK_CUTOFF: u32 = THRESHOLDS[THRESHOLDS.len() - 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    BaseResults,
    TermAssociation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub doc_id: String,
    pub score: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoredRanking {
    pub entries: Vec<ScoredEntry>,
}

impl ScoredRanking {
    pub fn doc_ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.doc_id.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RerankRequest<'a> {
    pub query_terms: &'a [String],
    /// One ranking per base function of the model, in the model's order.
    pub base_rankings: &'a [RankedList],
    pub model: &'a Model,
    pub k: usize,
}

fn base_rank_maps(base_rankings: &[RankedList]) -> Vec<HashMap<&str, u32>> {
    base_rankings
        .iter()
        .map(|r| {
            r.entries
                .iter()
                .filter(|e| e.rank <= RANK_CUTOFF)
                .map(|e| (e.doc_id.as_str(), e.rank))
                .collect()
        })
        .collect()
}

/// Top-100 of each base ranking plus every document with a nonzero
/// term/document weight for some query term.
pub fn candidates(query_terms: &[String], base_rankings: &[RankedList], model: &Model) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = base_rankings
        .iter()
        .flat_map(|r| r.entries.iter().filter(|e| e.rank <= RANK_CUTOFF))
        .map(|e| e.doc_id.clone())
        .collect();
    let terms: BTreeSet<&str> = query_terms.iter().map(String::as_str).collect();
    for term in terms {
        out.extend(model.docs_for_term(term).iter().map(|(d, _)| d.clone()));
    }
    out
}

fn ranks_for(doc: &str, maps: &[HashMap<&str, u32>], functions: usize) -> Vec<Option<u32>> {
    (0..functions)
        .map(|f| maps.get(f).and_then(|m| m.get(doc).copied()))
        .collect()
}

/// `rel(d, q) = w · Φ(d, q)`.
pub fn score(doc: &str, query_terms: &[String], base_rankings: &[RankedList], model: &Model) -> f64 {
    let maps = base_rank_maps(base_rankings);
    score_with(doc, query_terms, &maps, model)
}

fn score_with(doc: &str, query_terms: &[String], maps: &[HashMap<&str, u32>], model: &Model) -> f64 {
    let functions = model.space().base_functions().len();
    let ranks = ranks_for(doc, maps, functions);
    model.score_features(&phi_frozen(model.space(), doc, query_terms, &ranks))
}

/// Score all candidates and return the top `k`, ordered by score, then
/// first-base-function rank, then doc id.
pub fn rerank(request: &RerankRequest<'_>) -> ScoredRanking {
    let maps = base_rank_maps(request.base_rankings);
    let mut scored: Vec<(ScoredEntry, u32)> = candidates(request.query_terms, request.base_rankings, request.model)
        .into_iter()
        .map(|doc| {
            let in_base = maps.iter().any(|m| m.contains_key(doc.as_str()));
            let base_rank = maps
                .first()
                .and_then(|m| m.get(doc.as_str()).copied())
                .unwrap_or(u32::MAX);
            let score = score_with(&doc, request.query_terms, &maps, request.model);
            let origin = if in_base {
                Origin::BaseResults
            } else {
                Origin::TermAssociation
            };
            (
                ScoredEntry {
                    doc_id: doc,
                    score,
                    origin,
                },
                base_rank,
            )
        })
        .collect();
    scored.sort_by(|(a, ra), (b, rb)| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then(ra.cmp(rb))
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    scored.truncate(request.k);
    ScoredRanking {
        entries: scored.into_iter().map(|(e, _)| e).collect(),
    }
}
