//! Query-chain segmentation and the pairwise features used by the optional
//! same-chain classifier.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::error::{Error, Result};
use crate::search_log::{queries_with_clicks, ClickEvent, LogEvent, QueryEvent, SearchLog};
use crate::svm::LinearModel;

/// Half an hour.
pub const DEFAULT_WINDOW_SECONDS: u64 = 1800;

/// Result-list prefix compared by the doc-id and abstract features.
const TOP_RESULTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryChain {
    pub chain_id: String,
    pub session_id: String,
    pub queries: Vec<QueryEvent>,
    /// `clicks[i]` are the clicks on `queries[i]`.
    pub clicks: Vec<Vec<ClickEvent>>,
}

impl QueryChain {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.iter().map(|q| q.query_id.as_str())
    }

    pub fn record(&self) -> ChainRecord {
        ChainRecord {
            chain_id: self.chain_id.clone(),
            session: self.session_id.clone(),
            qids: self.query_ids().map(str::to_owned).collect(),
        }
    }
}

/// Split one session's time-ordered events into chains: a gap of more than
/// `window_seconds` between consecutive queries starts a new chain.
pub fn segment_heuristic(session_events: &[LogEvent], window_seconds: u64) -> Vec<QueryChain> {
    let mut chains: Vec<QueryChain> = Vec::new();
    let mut last_time: Option<u64> = None;
    for entry in queries_with_clicks(session_events) {
        let t = entry.query.timestamp;
        let starts_new = match last_time {
            None => true,
            Some(prev) => t.saturating_sub(prev) > window_seconds,
        };
        if starts_new {
            let session_id = entry.query.session_id.clone();
            chains.push(QueryChain {
                chain_id: format!("{session_id}/{}", chains.len()),
                session_id,
                queries: Vec::new(),
                clicks: Vec::new(),
            });
        }
        let chain = chains.last_mut().expect("a chain was just ensured");
        chain.queries.push(entry.query);
        chain.clicks.push(entry.clicks);
        last_time = Some(t);
    }
    chains
}

/// Segment every session of a log, in session-id order.
pub fn segment_log(log: &SearchLog, window_seconds: u64) -> Vec<QueryChain> {
    log.group_sessions()
        .values()
        .flat_map(|events| segment_heuristic(events, window_seconds))
        .collect()
}

/// Persisted form of a chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub chain_id: String,
    pub session: String,
    pub qids: Vec<String>,
}

pub fn write_chains(chains: &[QueryChain], mut out: impl Write) -> std::io::Result<()> {
    for chain in chains {
        serde_json::to_writer(&mut out, &chain.record())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_chain_records(reader: impl BufRead) -> Result<Vec<ChainRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(records)
}

/// Rebuild chains from persisted records against the log they were cut from.
pub fn resolve_chains(log: &SearchLog, records: &[ChainRecord]) -> Result<Vec<QueryChain>> {
    let mut by_qid: HashMap<&str, (QueryEvent, Vec<ClickEvent>)> = HashMap::new();
    for event in log.events() {
        match event {
            LogEvent::Query(q) => {
                by_qid.insert(&q.query_id, (q.clone(), Vec::new()));
            }
            LogEvent::Click(c) => {
                if let Some(entry) = by_qid.get_mut(c.query_id.as_str()) {
                    entry.1.push(c.clone());
                }
            }
        }
    }
    let mut used = HashSet::new();
    let mut chains = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let structural = |message: String| Error::Structural { line: i + 1, message };
        if record.qids.is_empty() {
            return Err(structural(format!("chain `{}` is empty", record.chain_id)));
        }
        let mut chain = QueryChain {
            chain_id: record.chain_id.clone(),
            session_id: record.session.clone(),
            queries: Vec::new(),
            clicks: Vec::new(),
        };
        for qid in &record.qids {
            let Some((query, clicks)) = by_qid.get(qid.as_str()) else {
                return Err(structural(format!("unknown query id `{qid}`")));
            };
            if query.session_id != record.session {
                return Err(structural(format!(
                    "query `{qid}` is not in session `{}`",
                    record.session
                )));
            }
            if !used.insert(qid.clone()) {
                return Err(structural(format!("query `{qid}` appears in two chains")));
            }
            chain.queries.push(query.clone());
            chain.clicks.push(clicks.clone());
        }
        chains.push(chain);
    }
    Ok(chains)
}

/// The sixteen same-chain features for an ordered query pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainPairFeatures {
    pub cos_queries: f64,
    pub cos_docids_top10: f64,
    pub cos_abstracts_top10: f64,
    pub trigram_match: f64,
    pub share_one_word: f64,
    pub share_two_words: f64,
    pub share_phrase_two_words: f64,
    pub num_different_words: f64,
    pub dt_le_5: f64,
    pub dt_le_10: f64,
    pub dt_le_30: f64,
    pub dt_le_100: f64,
    pub dt_gt_100: f64,
    pub norm_clicks_r1: f64,
    pub norm_min_results: f64,
    pub norm_max_results: f64,
}

impl ChainPairFeatures {
    pub const DIM: usize = 16;

    pub const NAMES: [&'static str; Self::DIM] = [
        "cos_queries",
        "cos_docids_top10",
        "cos_abstracts_top10",
        "trigram_match",
        "share_one_word",
        "share_two_words",
        "share_phrase_two_words",
        "num_different_words",
        "dt_le_5",
        "dt_le_10",
        "dt_le_30",
        "dt_le_100",
        "dt_gt_100",
        "norm_clicks_r1",
        "norm_min_results",
        "norm_max_results",
    ];

    pub fn to_array(&self) -> [f64; Self::DIM] {
        [
            self.cos_queries,
            self.cos_docids_top10,
            self.cos_abstracts_top10,
            self.trigram_match,
            self.share_one_word,
            self.share_two_words,
            self.share_phrase_two_words,
            self.num_different_words,
            self.dt_le_5,
            self.dt_le_10,
            self.dt_le_30,
            self.dt_le_100,
            self.dt_gt_100,
            self.norm_clicks_r1,
            self.norm_min_results,
            self.norm_max_results,
        ]
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn cosine<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

fn term_counts<'a>(terms: impl IntoIterator<Item = &'a str>) -> BTreeMap<&'a str, f64> {
    let mut m = BTreeMap::new();
    for t in terms {
        *m.entry(t).or_insert(0.0) += 1.0;
    }
    m
}

fn trigrams(text: &str) -> BTreeSet<String> {
    let normalized: Vec<char> = text
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
        .chars()
        .collect();
    if normalized.is_empty() {
        return BTreeSet::new();
    }
    if normalized.len() < 3 {
        return BTreeSet::from([normalized.iter().collect()]);
    }
    normalized.windows(3).map(|w| w.iter().collect()).collect()
}

fn bigrams(terms: &[String]) -> HashSet<(&str, &str)> {
    terms.windows(2).map(|w| (w[0].as_str(), w[1].as_str())).collect()
}

/// Compute the pair features for `q1` issued before `q2`; `q1_clicks` is the
/// number of clicks `q1` received.
pub fn extract_pair_features(q1: &QueryEvent, q2: &QueryEvent, q1_clicks: usize) -> ChainPairFeatures {
    let cos_queries = cosine(
        &term_counts(q1.terms.iter().map(String::as_str)),
        &term_counts(q2.terms.iter().map(String::as_str)),
    );

    let top_ids = |q: &QueryEvent| -> BTreeMap<String, f64> {
        q.results
            .iter()
            .take(TOP_RESULTS)
            .map(|r| (r.doc_id.clone(), 1.0))
            .collect()
    };
    let cos_docids_top10 = cosine(&top_ids(q1), &top_ids(q2));

    let abstract_bag = |q: &QueryEvent| -> BTreeMap<String, f64> {
        let mut bag = BTreeMap::new();
        for r in q.results.iter().take(TOP_RESULTS) {
            for t in tokenize(&r.abstract_text) {
                *bag.entry(t).or_insert(0.0) += 1.0;
            }
        }
        bag
    };
    let cos_abstracts_top10 = cosine(&abstract_bag(q1), &abstract_bag(q2));

    let g1 = trigrams(&q1.text());
    let g2 = trigrams(&q2.text());
    let union = g1.union(&g2).count();
    let trigram_match = if union == 0 {
        0.0
    } else {
        g1.intersection(&g2).count() as f64 / union as f64
    };

    let s1: BTreeSet<&str> = q1.terms.iter().map(String::as_str).collect();
    let s2: BTreeSet<&str> = q2.terms.iter().map(String::as_str).collect();
    let shared = s1.intersection(&s2).count();
    let phrase = !bigrams(&q1.terms).is_disjoint(&bigrams(&q2.terms));

    let dt = q2.timestamp.saturating_sub(q1.timestamp);
    let (n1, n2) = (q1.results.len(), q2.results.len());

    ChainPairFeatures {
        cos_queries,
        cos_docids_top10,
        cos_abstracts_top10,
        trigram_match,
        share_one_word: indicator(shared >= 1),
        share_two_words: indicator(shared >= 2),
        share_phrase_two_words: indicator(phrase),
        num_different_words: s1.symmetric_difference(&s2).count() as f64,
        dt_le_5: indicator(dt <= 5),
        dt_le_10: indicator(dt <= 10),
        dt_le_30: indicator(dt <= 30),
        dt_le_100: indicator(dt <= 100),
        dt_gt_100: indicator(dt > 100),
        norm_clicks_r1: q1_clicks.min(10) as f64 / 10.0,
        norm_min_results: (n1.min(n2) as f64 / 100.0).min(1.0),
        norm_max_results: (n1.max(n2) as f64 / 100.0).min(1.0),
    }
}

/// Same-chain decision: strictly positive linear score.
pub fn classify_pair(features: &ChainPairFeatures, model: &LinearModel) -> Result<bool> {
    Ok(model.decision(&features.to_array())? > 0.0)
}

/// An ordered query pair from one session within the pairing window.
#[derive(Debug, Clone)]
pub struct CandidatePair {
    pub first: String,
    pub second: String,
    pub features: ChainPairFeatures,
}

/// Every ordered pair of queries in one session no more than `window_seconds`
/// apart, with features.
pub fn candidate_pairs(session_events: &[LogEvent], window_seconds: u64) -> Vec<CandidatePair> {
    let entries = queries_with_clicks(session_events);
    let mut pairs = Vec::new();
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            if b.query.timestamp.saturating_sub(a.query.timestamp) > window_seconds {
                break;
            }
            pairs.push(CandidatePair {
                first: a.query.query_id.clone(),
                second: b.query.query_id.clone(),
                features: extract_pair_features(&a.query, &b.query, a.clicks.len()),
            });
        }
    }
    pairs
}

/// Pairwise agreement of a segmentation with a reference labelling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAgreement {
    pub predicted_pairs: usize,
    pub true_pairs: usize,
    pub correct_pairs: usize,
}

impl PairAgreement {
    pub fn precision(&self) -> f64 {
        if self.predicted_pairs == 0 {
            1.0
        } else {
            self.correct_pairs as f64 / self.predicted_pairs as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.true_pairs == 0 {
            1.0
        } else {
            self.correct_pairs as f64 / self.true_pairs as f64
        }
    }
}

/// Compare chains against reference labels: two queries belong together iff
/// they share a session and a label.
pub fn pair_agreement(chains: &[QueryChain], label_of: impl Fn(&str) -> Option<String>) -> PairAgreement {
    let mut predicted = HashSet::new();
    let mut by_truth: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for chain in chains {
        let ids: Vec<&str> = chain.query_ids().collect();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                predicted.insert(ordered(a, b));
            }
        }
        for qid in ids {
            if let Some(label) = label_of(qid) {
                by_truth
                    .entry((chain.session_id.clone(), label))
                    .or_default()
                    .push(qid.to_owned());
            }
        }
    }
    let mut truth = HashSet::new();
    for ids in by_truth.values() {
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                truth.insert(ordered(a, b));
            }
        }
    }
    PairAgreement {
        predicted_pairs: predicted.len(),
        true_pairs: truth.len(),
        correct_pairs: predicted.intersection(&truth).count(),
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}
