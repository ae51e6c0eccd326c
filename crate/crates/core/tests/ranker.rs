mod common;

use clickchain::corpus::{RankedEntry, RankedList};
use clickchain::features::FeatureSpace;
use clickchain::model::Model;
use clickchain::ranker::{candidates, rerank, score, Origin, RerankRequest};
use clickchain::seed::rng_for;
use rand::seq::SliceRandom;
use rand::Rng;

use common::terms;

const UNIVERSE: usize = 50;

fn doc(i: usize) -> String {
    format!("doc{i:02}")
}

fn base_list(order: &[usize]) -> RankedList {
    RankedList {
        query_id: "q".into(),
        entries: order
            .iter()
            .enumerate()
            .map(|(i, &d)| RankedEntry {
                doc_id: doc(d),
                score: 1.0,
                rank: i as u32 + 1,
            })
            .collect(),
    }
}

/// A random base list over part of the universe and random term weights,
/// some on documents outside the list.
fn random_case(seed: u64) -> (RankedList, Model, Vec<String>) {
    let mut rng = rng_for(seed, "test/ranker");
    let mut order: Vec<usize> = (0..UNIVERSE).collect();
    order.shuffle(&mut rng);
    order.truncate(rng.random_range(0..30));
    let q = terms(["alpha", "alpha beta", "beta gamma", "delta"][rng.random_range(0..4)]);
    let mut model = Model::initial(FeatureSpace::single("base"), rng.random_range(0.1..2.0));
    for _ in 0..rng.random_range(0..12) {
        let term = ["alpha", "beta", "gamma", "delta", "other"][rng.random_range(0..5)];
        model = model.with_term_weight(term, &doc(rng.random_range(0..UNIVERSE)), rng.random_range(-5.0..40.0));
    }
    (base_list(&order), model, q)
}

#[test]
fn candidate_set_loses_nothing_against_full_scan() {
    for seed in 0..200 {
        let (base, model, q) = random_case(seed);
        let lists = std::slice::from_ref(&base);
        let cand = candidates(&q, lists, &model);
        for i in 0..UNIVERSE {
            let d = doc(i);
            let s = score(&d, &q, lists, &model);
            if !cand.contains(&d) {
                assert_eq!(s, 0.0, "seed {seed}: {d} outside candidates scores {s}");
            }
        }
        let out = rerank(&RerankRequest {
            query_terms: &q,
            base_rankings: lists,
            model: &model,
            k: UNIVERSE,
        });
        assert_eq!(out.entries.len(), cand.len());
        for w in out.entries.windows(2) {
            assert!(w[0].score >= w[1].score, "seed {seed}: not sorted");
        }
        for e in &out.entries {
            assert_eq!(e.score, score(&e.doc_id, &q, lists, &model));
            let in_base = base.rank_of(&e.doc_id).is_some();
            assert_eq!(e.origin == Origin::BaseResults, in_base);
        }
        // no non-candidate could enter the top k by beating a positive score
        let best_outside = (0..UNIVERSE)
            .map(doc)
            .filter(|d| !cand.contains(d))
            .map(|d| score(&d, &q, lists, &model))
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some(last) = out.entries.last() {
            assert!(best_outside <= 0.0 || best_outside <= last.score);
        }
    }
}

#[test]
fn raising_a_term_weight_never_demotes_the_document() {
    for seed in 0..200 {
        let (base, model, q) = random_case(seed);
        let lists = std::slice::from_ref(&base);
        let target = doc(seed as usize % UNIVERSE);
        let before = rerank(&RerankRequest {
            query_terms: &q,
            base_rankings: lists,
            model: &model,
            k: UNIVERSE,
        });
        let w = model.term_weight(&q[0], &target);
        let raised = model.clone().with_term_weight(&q[0], &target, w + 3.0);
        let after = rerank(&RerankRequest {
            query_terms: &q,
            base_rankings: lists,
            model: &raised,
            k: UNIVERSE,
        });
        let pos = |r: &clickchain::ranker::ScoredRanking| r.entries.iter().position(|e| e.doc_id == target);
        match (pos(&before), pos(&after)) {
            (Some(b), Some(a)) => assert!(a <= b, "seed {seed}: {b} -> {a}"),
            (None, _) => {}
            (Some(_), None) => panic!("seed {seed}: document dropped"),
        }
    }
}

#[test]
fn ties_break_by_base_rank_then_doc_id() {
    let base = base_list(&[3, 1, 2]);
    let model = Model::initial(FeatureSpace::single("base"), 1.0)
        .with_term_weight("alpha", &doc(40), 27.0)
        .with_term_weight("alpha", &doc(30), 27.0);
    let q = terms("alpha");
    let out = rerank(&RerankRequest {
        query_terms: &q,
        base_rankings: std::slice::from_ref(&base),
        model: &model,
        k: 10,
    });
    // rank 2 scores 27, the same as the two term-only documents
    assert_eq!(out.doc_ids(), vec![doc(3), doc(1), doc(30), doc(40), doc(2)]);
}

#[test]
fn k_truncates_and_zero_k_is_empty() {
    let (base, model, q) = random_case(3);
    let lists = std::slice::from_ref(&base);
    let full = rerank(&RerankRequest {
        query_terms: &q,
        base_rankings: lists,
        model: &model,
        k: UNIVERSE,
    });
    for k in [0, 1, 5] {
        let out = rerank(&RerankRequest {
            query_terms: &q,
            base_rankings: lists,
            model: &model,
            k,
        });
        assert_eq!(out.doc_ids(), full.doc_ids().into_iter().take(k).collect::<Vec<_>>());
    }
}
