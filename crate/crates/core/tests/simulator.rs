use std::cell::RefCell;

use clickchain::chains::segment_log;
use clickchain::corpus::Corpus;
use clickchain::feedback::{prefs_for_log, FeedbackMode, FeedbackOptions, PaddingSource, Strategy};
use clickchain::fixtures::{fixture_corpus, fixture_intents};
use clickchain::search_log::LogEvent;
use clickchain::seed::rng_for;
use clickchain::simulator::{simulate, strategy_accuracy, AccuracyCount, UserBehavior, SESSION_SPACING_SECONDS};
use rand::seq::SliceRandom;

fn accuracy(
    corpus: &Corpus,
    behavior: &UserBehavior,
    random_ranker: bool,
    sessions: usize,
    seed: u64,
) -> std::collections::BTreeMap<Strategy, AccuracyCount> {
    let intents = fixture_intents();
    let ids: Vec<String> = corpus.documents().iter().map(|d| d.doc_id.clone()).collect();
    let rng = RefCell::new(rng_for(seed, "test/random-ranker"));
    let shuffled = |_: &[String]| {
        let mut v = ids.clone();
        v.shuffle(&mut *rng.borrow_mut());
        v.truncate(behavior.results_shown);
        v
    };
    let base = |t: &[String]| {
        corpus
            .base_retrieve("", t, behavior.results_shown)
            .doc_ids()
            .map(str::to_owned)
            .collect()
    };
    let ranker: &dyn Fn(&[String]) -> Vec<String> = if random_ranker { &shuffled } else { &base };
    let (log, sidecar) = simulate(corpus, ranker, &intents, behavior, sessions, seed).unwrap();
    let chains = segment_log(&log, 1800);
    let padding = PaddingSource::new(ids.clone(), seed);
    let prefs = prefs_for_log(&chains, FeedbackMode::Qc, &padding, FeedbackOptions::default());
    strategy_accuracy(&prefs.preferences, &sidecar)
}

#[test]
fn coin_flip_clicks_carry_no_signal() {
    // Random rankings over the hand-written pages only, so relevant pages are
    // shown often; clicks ignore relevance at ε = ½.
    let corpus = Corpus::build(fixture_corpus(0, 1)).unwrap();
    let behavior = UserBehavior {
        epsilon: 0.5,
        stop_when_satisfied: false,
        ..UserBehavior::default()
    };
    let acc = accuracy(&corpus, &behavior, true, 8000, 5);
    for s in [Strategy::ClickSkipAbove, Strategy::FirstNoClickSecond] {
        let a = acc[&s];
        let n = a.pairs() as f64;
        let p = a.accuracy().unwrap();
        let half_width = 1.96 * (0.25 / n).sqrt();
        assert!(n >= 200.0, "{s}: only {n} strict pairs");
        assert!((p - 0.5).abs() <= half_width, "{s}: {p:.3} over {n} pairs");
    }
}

#[test]
fn accuracy_degrades_with_noise() {
    let corpus = Corpus::build(fixture_corpus(300, 1)).unwrap();
    let mut last = 1.0;
    for epsilon in [0.0, 0.1, 0.25, 0.4] {
        let behavior = UserBehavior {
            epsilon,
            ..UserBehavior::default()
        };
        let a = accuracy(&corpus, &behavior, false, 1500, 8)[&Strategy::ClickSkipAbove];
        let p = a.accuracy().unwrap();
        assert!(p <= last + 0.01, "ε = {epsilon}: {p:.3} after {last:.3}");
        last = p;
    }
    assert!(last < 0.95);
}

#[test]
fn simulated_sessions_look_like_a_search_log() {
    let corpus = Corpus::build(fixture_corpus(300, 2)).unwrap();
    let intents = fixture_intents();
    let behavior = UserBehavior::default();
    let base = |t: &[String]| corpus.base_retrieve("", t, 10).doc_ids().map(str::to_owned).collect();
    let (log, sidecar) = simulate(&corpus, &base, &intents, &behavior, 400, 3).unwrap();
    let scripts: Vec<Vec<String>> = intents.iter().flat_map(|i| i.query_script.clone()).collect();
    for (session, events) in log.group_sessions() {
        let index: u64 = session[1..].parse().unwrap();
        let queries: Vec<_> = events
            .iter()
            .filter_map(|e| match e {
                LogEvent::Query(q) => Some(q),
                _ => None,
            })
            .collect();
        assert!(!queries.is_empty());
        assert_eq!(queries[0].timestamp, index * SESSION_SPACING_SECONDS);
        for (j, q) in queries.iter().enumerate() {
            assert_eq!(q.query_id, format!("{session}.{j}"));
            assert!(scripts.contains(&q.terms), "{:?}", q.terms);
            assert!(q.results.len() <= behavior.results_shown);
        }
        for w in queries.windows(2) {
            let gap = w[1].timestamp - w[0].timestamp;
            if sidecar.intent_of(&w[0].query_id) == sidecar.intent_of(&w[1].query_id) {
                assert!((5..=300 + 30).contains(&gap), "{gap}");
            } else {
                assert!(gap >= behavior.topic_switch_gap_seconds.0, "{gap}");
            }
        }
        let intents_seen: std::collections::BTreeSet<_> =
            queries.iter().filter_map(|q| sidecar.intent_of(&q.query_id)).collect();
        assert!(intents_seen.len() <= 3);
    }
    for click in log.clicks() {
        assert!(click.rank as usize <= behavior.results_shown);
    }
}

#[test]
fn invalid_behavior_is_rejected() {
    let corpus = Corpus::build(fixture_corpus(10, 2)).unwrap();
    let base = |t: &[String]| corpus.base_retrieve("", t, 10).doc_ids().map(str::to_owned).collect();
    for behavior in [
        UserBehavior {
            epsilon: 1.5,
            ..UserBehavior::default()
        },
        UserBehavior {
            scan_persistence: -0.1,
            ..UserBehavior::default()
        },
        UserBehavior {
            gap_seconds: (10, 5),
            ..UserBehavior::default()
        },
    ] {
        assert!(simulate(&corpus, &base, &fixture_intents(), &behavior, 1, 1).is_err());
    }
}
