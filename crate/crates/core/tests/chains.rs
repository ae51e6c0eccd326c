mod common;

use std::collections::BTreeSet;

use clickchain::chains::{
    candidate_pairs, extract_pair_features, pair_agreement, read_chain_records, resolve_chains, segment_log,
    write_chains, ChainPairFeatures,
};
use clickchain::pipeline::{build_corpus, load_intents, ExperimentConfig};
use clickchain::search_log::{QueryEvent, ResultEntry};
use clickchain::simulator::{simulate, UserBehavior};
use clickchain::svm::train_binary;

use common::random_log;

#[test]
fn segmentation_partitions_each_session_into_maximal_runs() {
    for seed in 0..300 {
        let log = random_log(seed);
        for window in [0, 600, 1800, 10_000] {
            let chains = segment_log(&log, window);
            let ids: Vec<&str> = chains.iter().flat_map(|c| c.query_ids()).collect();
            let unique: BTreeSet<&str> = ids.iter().copied().collect();
            assert_eq!(ids.len(), log.queries().count());
            assert_eq!(unique.len(), ids.len());
            for c in &chains {
                assert!(!c.is_empty());
                assert_eq!(c.clicks.len(), c.len());
                for w in c.queries.windows(2) {
                    assert_eq!(w[0].session_id, c.session_id);
                    assert!(w[1].timestamp - w[0].timestamp <= window);
                }
                for (q, clicks) in c.queries.iter().zip(&c.clicks) {
                    assert!(clicks.iter().all(|k| k.query_id == q.query_id));
                }
            }
            // maximal: consecutive chains of a session are separated by a gap
            for w in chains.windows(2) {
                if w[0].session_id == w[1].session_id {
                    let gap = w[1].queries[0].timestamp - w[0].queries.last().unwrap().timestamp;
                    assert!(gap > window, "seed {seed}: gap {gap} within window {window}");
                }
            }
        }
    }
}

#[test]
fn chain_records_resolve_back_to_the_same_chains() {
    for seed in 0..50 {
        let log = random_log(seed);
        let chains = segment_log(&log, 1800);
        let mut buf = Vec::new();
        write_chains(&chains, &mut buf).unwrap();
        let records = read_chain_records(buf.as_slice()).unwrap();
        assert_eq!(resolve_chains(&log, &records).unwrap(), chains);
    }
}

fn q(qid: &str, t: u64, terms: &str, docs: &[&str]) -> QueryEvent {
    QueryEvent {
        query_id: qid.into(),
        session_id: "s".into(),
        timestamp: t,
        terms: terms.split_whitespace().map(String::from).collect(),
        results: docs
            .iter()
            .map(|d| ResultEntry {
                doc_id: d.to_string(),
                abstract_text: format!("text of {d}"),
            })
            .collect(),
    }
}

#[test]
fn symmetric_features_do_not_depend_on_pair_order() {
    let a = q("a", 100, "rare books sale", &["d1", "d2", "d3"]);
    let b = q("b", 107, "rare books", &["d2", "d4"]);
    let f = extract_pair_features(&a, &b, 1);
    let g = extract_pair_features(&b, &a, 1);
    for (i, name) in ChainPairFeatures::NAMES.iter().enumerate() {
        if *name != "norm_clicks_r1" && !name.starts_with("dt_") {
            assert!((f.to_array()[i] - g.to_array()[i]).abs() < 1e-12, "{name}");
        }
    }
    assert_eq!(f.share_one_word, 1.0);
    assert_eq!(f.share_two_words, 1.0);
    assert_eq!(f.share_phrase_two_words, 1.0);
    assert_eq!(f.dt_le_10, 1.0);
    assert_eq!(f.dt_le_5, 0.0);
}

#[test]
fn learned_classifier_beats_always_same_chain_on_held_out_pairs() {
    let cfg = ExperimentConfig::default();
    let corpus = build_corpus(&cfg).unwrap();
    let intents = load_intents(&cfg).unwrap();
    let behavior = UserBehavior {
        topic_switch_prob: 0.4,
        topic_switch_gap_seconds: (5, 900),
        ..UserBehavior::default()
    };
    let ranker = |t: &[String]| corpus.base_retrieve("", t, 10).doc_ids().map(str::to_owned).collect();
    let (log, sidecar) = simulate(&corpus, &ranker, &intents, &behavior, 600, 21).unwrap();
    let mut examples: Vec<(Vec<f64>, bool)> = Vec::new();
    for events in log.group_sessions().values() {
        for p in candidate_pairs(events, 1800) {
            let same = sidecar.intent_of(&p.first) == sidecar.intent_of(&p.second);
            examples.push((p.features.to_array().to_vec(), same));
        }
    }
    let split = examples.len() * 7 / 10;
    let (train, test) = examples.split_at(split);
    let model = train_binary(train, 1.0, 1e-6).unwrap();
    let correct = test.iter().filter(|(x, y)| model.predict(x).unwrap() == *y).count();
    let positives = test.iter().filter(|(_, y)| *y).count();
    let accuracy = correct as f64 / test.len() as f64;
    let baseline = positives as f64 / test.len() as f64;
    assert!(
        test.len() > 200 && positives < test.len(),
        "{} test pairs, {positives} positive",
        test.len()
    );
    assert!(
        accuracy > baseline,
        "classifier {accuracy:.3} vs always-positive {baseline:.3}"
    );
}

#[test]
fn pair_agreement_counts_pairs() {
    let log = random_log(4);
    let chains = segment_log(&log, u64::MAX);
    let all = pair_agreement(&chains, |_| Some("x".into()));
    assert_eq!((all.precision(), all.recall()), (1.0, 1.0));
    let none = pair_agreement(&chains, |qid| Some(qid.to_owned()));
    assert_eq!(none.true_pairs, 0);
    assert_eq!(none.recall(), 1.0);
}
