//! Helpers shared by the integration suites.
#![allow(dead_code)]

use clickchain::search_log::{ClickEvent, LogEvent, QueryEvent, ResultEntry, SearchLog};
use clickchain::seed::rng_for;
use rand::seq::SliceRandom;
use rand::Rng;

const WORDS: &[&str] = &[
    "rare",
    "books",
    "special",
    "collections",
    "lexis",
    "nexis",
    "ndlf",
    "and",
    "maps",
];

pub fn terms(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

pub fn ids(s: &[&str]) -> Vec<String> {
    s.iter().map(|d| d.to_string()).collect()
}

/// A valid random log: a few sessions of a few queries each, random result
/// lists over a small document pool and random clicks.
pub fn random_log(seed: u64) -> SearchLog {
    let mut rng = rng_for(seed, "test/random-log");
    let pool: Vec<String> = (0..30).map(|i| format!("d{i}")).collect();
    let mut events = Vec::new();
    let mut t = 1_000u64;
    for s in 0..rng.random_range(1..=3) {
        let session = format!("s{s}");
        for j in 0..rng.random_range(1..=5) {
            t += rng.random_range(0..4000);
            let qid = format!("{session}.{j}");
            let n_terms = rng.random_range(1..=3);
            let terms = (0..n_terms)
                .map(|_| WORDS[rng.random_range(0..WORDS.len())].to_owned())
                .collect();
            let mut docs = pool.clone();
            docs.shuffle(&mut rng);
            docs.truncate(rng.random_range(0..=12));
            let results: Vec<ResultEntry> = docs
                .iter()
                .map(|d| ResultEntry {
                    doc_id: d.clone(),
                    abstract_text: format!("{} {}", WORDS[rng.random_range(0..WORDS.len())], d),
                })
                .collect();
            let clicked: Vec<u32> = (1..=results.len() as u32).filter(|_| rng.random_bool(0.3)).collect();
            events.push(LogEvent::Query(QueryEvent {
                query_id: qid.clone(),
                session_id: session.clone(),
                timestamp: t,
                terms,
                results,
            }));
            for rank in clicked {
                t += rng.random_range(0..20);
                events.push(LogEvent::Click(ClickEvent {
                    query_id: qid.clone(),
                    doc_id: docs[rank as usize - 1].clone(),
                    rank,
                    timestamp: t,
                }));
            }
        }
        t += 86_400;
    }
    SearchLog::from_events(events).expect("generated log is valid")
}
