//! Simulated searchers with known ground truth.
//!
//! A user has an intent (a set of relevant documents and a scripted sequence
//! of reformulations). For each query they scan the presented list from the
//! top, always reading the first two abstracts and the one below any click,
//! and otherwise continuing with a fixed probability. A viewed document with
//! relevance `g` is clicked with probability `g(1 − ε) + (1 − g)ε`.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::feedback::{Preference, Strategy};
use crate::search_log::{ClickEvent, LogEvent, QueryEvent, ResultEntry, SearchLog};
use crate::seed::{rng_for, StageRng};

/// Sessions start a day apart.
pub const SESSION_SPACING_SECONDS: u64 = 86_400;

/// Words of body text appended to the title in a result abstract.
const ABSTRACT_WORDS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub intent_id: String,
    /// Graded relevance in `[0, 1]`; unlisted documents are irrelevant.
    pub relevant_docs: BTreeMap<String, f64>,
    /// The queries this user tries, in order.
    pub query_script: Vec<Vec<String>>,
}

impl Intent {
    pub fn relevance(&self, doc: &str) -> f64 {
        self.relevant_docs.get(doc).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.query_script.is_empty() {
            return Err(Error::Config(format!(
                "intent `{}` has an empty query script",
                self.intent_id
            )));
        }
        if let Some((doc, g)) = self.relevant_docs.iter().find(|(_, g)| !(0.0..=1.0).contains(*g)) {
            return Err(Error::Config(format!(
                "intent `{}`: relevance {g} of `{doc}` is outside [0, 1]",
                self.intent_id
            )));
        }
        Ok(())
    }
}

pub fn read_intents(text: &str) -> Result<Vec<Intent>> {
    let intents: Vec<Intent> = serde_json::from_str(text)?;
    for intent in &intents {
        intent.validate()?;
    }
    Ok(intents)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UserBehavior {
    /// Probability of reading on past a rank when nothing forces it.
    pub scan_persistence: f64,
    /// Click noise.
    pub epsilon: f64,
    pub min_view_top2: bool,
    pub view_one_below_click: bool,
    /// Probability of trying the next scripted query when unsatisfied.
    pub reformulate_prob: f64,
    /// Stop reading (after the abstract below the click) and end the chain
    /// once a relevant result has been clicked.
    pub stop_when_satisfied: bool,
    /// Seconds between the last event of a query and the next query of the
    /// same chain, drawn uniformly from this inclusive range.
    pub gap_seconds: (u64, u64),
    /// Probability of starting an unrelated intent in the same session.
    pub topic_switch_prob: f64,
    pub topic_switch_gap_seconds: (u64, u64),
    pub results_shown: usize,
}

impl Default for UserBehavior {
    fn default() -> Self {
        UserBehavior {
            scan_persistence: 0.7,
            epsilon: 0.1,
            min_view_top2: true,
            view_one_below_click: true,
            reformulate_prob: 0.9,
            stop_when_satisfied: true,
            gap_seconds: (5, 300),
            topic_switch_prob: 0.1,
            topic_switch_gap_seconds: (600, 14_400),
            results_shown: 10,
        }
    }
}

impl UserBehavior {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("scan_persistence", self.scan_persistence),
            ("epsilon", self.epsilon),
            ("reformulate_prob", self.reformulate_prob),
            ("topic_switch_prob", self.topic_switch_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if self.gap_seconds.0 > self.gap_seconds.1 || self.topic_switch_gap_seconds.0 > self.topic_switch_gap_seconds.1
        {
            return Err(Error::Config("gap ranges must be ordered (low, high)".into()));
        }
        if self.results_shown == 0 {
            return Err(Error::Config("results_shown must be at least 1".into()));
        }
        Ok(())
    }

    pub fn click_probability(&self, relevance: f64) -> f64 {
        relevance * (1.0 - self.epsilon) + (1.0 - relevance) * self.epsilon
    }
}

/// One query as a simulated user experienced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShownQuery {
    pub query_id: String,
    pub intent: usize,
    pub terms: Vec<String>,
    pub timestamp: u64,
    pub shown: Vec<String>,
    /// Number of leading results the user read.
    pub viewed: usize,
    /// (rank, time) of each click, in scan order.
    pub clicks: Vec<(u32, u64)>,
}

impl ShownQuery {
    pub fn clicked_docs(&self) -> Vec<String> {
        self.clicks
            .iter()
            .map(|&(rank, _)| self.shown[rank as usize - 1].clone())
            .collect()
    }

    fn last_time(&self) -> u64 {
        self.clicks.last().map_or(self.timestamp, |&(_, t)| t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSession {
    pub session_id: String,
    pub queries: Vec<ShownQuery>,
}

pub fn session_id(index: usize) -> String {
    format!("s{index:06}")
}

/// Run one user session. `present` maps query terms to the ranked document
/// ids shown to the user (only the first `results_shown` are used).
pub fn simulate_session(
    session_id: &str,
    start_time: u64,
    intents: &[Intent],
    behavior: &UserBehavior,
    rng: &mut StageRng,
    present: &mut dyn FnMut(&[String]) -> Vec<String>,
) -> SimulatedSession {
    let mut session = SimulatedSession {
        session_id: session_id.to_owned(),
        queries: Vec::new(),
    };
    if intents.is_empty() {
        return session;
    }
    let mut intent = rng.random_range(0..intents.len());
    let mut used = vec![intent];
    let mut t = start_time;
    loop {
        let script = &intents[intent].query_script;
        for (step, terms) in script.iter().enumerate() {
            if step > 0 {
                t += rng.random_range(behavior.gap_seconds.0..=behavior.gap_seconds.1);
            }
            let mut shown = present(terms);
            shown.truncate(behavior.results_shown);
            let query_id = format!("{session_id}.{}", session.queries.len());
            let (viewed, clicks, satisfied) = scan(&shown, &intents[intent], behavior, t, rng);
            let query = ShownQuery {
                query_id,
                intent,
                terms: terms.clone(),
                timestamp: t,
                shown,
                viewed,
                clicks,
            };
            t = query.last_time();
            session.queries.push(query);
            if satisfied && behavior.stop_when_satisfied {
                break;
            }
            if step + 1 < script.len() && !rng.random_bool(behavior.reformulate_prob) {
                break;
            }
        }
        // A session never returns to an intent, so intent labels identify
        // chains within a session.
        if used.len() >= intents.len().min(3) || !rng.random_bool(behavior.topic_switch_prob) {
            break;
        }
        let fresh: Vec<usize> = (0..intents.len()).filter(|i| !used.contains(i)).collect();
        intent = fresh[rng.random_range(0..fresh.len())];
        used.push(intent);
        t += rng.random_range(behavior.topic_switch_gap_seconds.0..=behavior.topic_switch_gap_seconds.1);
    }
    session
}

/// Top-down scan of one result list. Returns (viewed count, clicks,
/// satisfied).
fn scan(
    shown: &[String],
    intent: &Intent,
    behavior: &UserBehavior,
    start: u64,
    rng: &mut StageRng,
) -> (usize, Vec<(u32, u64)>, bool) {
    let mut clicks = Vec::new();
    let mut satisfied = false;
    let mut viewed = 0;
    let mut t = start;
    while viewed < shown.len() {
        let relevance = intent.relevance(&shown[viewed]);
        viewed += 1;
        t += 2;
        let clicked = rng.random_bool(behavior.click_probability(relevance).clamp(0.0, 1.0));
        if clicked {
            t += 1;
            clicks.push((viewed as u32, t));
            satisfied |= relevance >= 0.5;
        }
        if viewed >= shown.len() {
            break;
        }
        let forced = (behavior.min_view_top2 && viewed < 2) || (behavior.view_one_below_click && clicked);
        if !forced && satisfied && behavior.stop_when_satisfied {
            break;
        }
        if !forced && !rng.random_bool(behavior.scan_persistence) {
            break;
        }
    }
    (viewed, clicks, satisfied)
}

/// Ground truth for each logged query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub qid: String,
    pub intent: String,
    pub relevance: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sidecar {
    records: Vec<SidecarRecord>,
    by_qid: HashMap<String, usize>,
}

impl Sidecar {
    pub fn new(records: Vec<SidecarRecord>) -> Self {
        let by_qid = records.iter().enumerate().map(|(i, r)| (r.qid.clone(), i)).collect();
        Sidecar { records, by_qid }
    }

    pub fn records(&self) -> &[SidecarRecord] {
        &self.records
    }

    pub fn get(&self, qid: &str) -> Option<&SidecarRecord> {
        self.by_qid.get(qid).map(|&i| &self.records[i])
    }

    pub fn intent_of(&self, qid: &str) -> Option<&str> {
        self.get(qid).map(|r| r.intent.as_str())
    }

    pub fn relevance(&self, qid: &str, doc: &str) -> Option<f64> {
        self.get(qid).map(|r| r.relevance.get(doc).copied().unwrap_or(0.0))
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read(reader: impl BufRead) -> Result<Sidecar> {
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
        Ok(Sidecar::new(records))
    }
}

/// Generate `n_sessions` sessions against a fixed ranking function. Each
/// session draws from its own seed stream, so output does not depend on
/// generation order.
pub fn simulate(
    corpus: &Corpus,
    ranker: &dyn Fn(&[String]) -> Vec<String>,
    intents: &[Intent],
    behavior: &UserBehavior,
    n_sessions: usize,
    seed: u64,
) -> Result<(SearchLog, Sidecar)> {
    behavior.validate()?;
    for intent in intents {
        intent.validate()?;
    }
    let mut events = Vec::new();
    let mut records = Vec::new();
    for index in 0..n_sessions {
        let id = session_id(index);
        let mut rng = rng_for(seed, &format!("simulate/{id}"));
        let mut present = |terms: &[String]| ranker(terms);
        let session = simulate_session(
            &id,
            index as u64 * SESSION_SPACING_SECONDS,
            intents,
            behavior,
            &mut rng,
            &mut present,
        );
        for q in session.queries {
            let intent = &intents[q.intent];
            records.push(SidecarRecord {
                qid: q.query_id.clone(),
                intent: intent.intent_id.clone(),
                relevance: intent.relevant_docs.clone(),
            });
            events.push(LogEvent::Query(QueryEvent {
                query_id: q.query_id.clone(),
                session_id: id.clone(),
                timestamp: q.timestamp,
                terms: q.terms.clone(),
                results: q
                    .shown
                    .iter()
                    .map(|d| ResultEntry {
                        doc_id: d.clone(),
                        abstract_text: corpus
                            .document(d)
                            .map(|doc| doc.snippet(ABSTRACT_WORDS))
                            .unwrap_or_default(),
                    })
                    .collect(),
            }));
            for &(rank, t) in &q.clicks {
                events.push(LogEvent::Click(ClickEvent {
                    query_id: q.query_id.clone(),
                    doc_id: q.shown[rank as usize - 1].clone(),
                    rank,
                    timestamp: t,
                }));
            }
        }
    }
    Ok((SearchLog::from_events(events)?, Sidecar::new(records)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AccuracyCount {
    pub agree: usize,
    pub disagree: usize,
}

impl AccuracyCount {
    pub fn pairs(&self) -> usize {
        self.agree + self.disagree
    }

    /// `None` when no strict pair was observed.
    pub fn accuracy(&self) -> Option<f64> {
        (self.pairs() > 0).then(|| self.agree as f64 / self.pairs() as f64)
    }

    /// One-sided lower confidence bound on the accuracy (normal
    /// approximation); `z = 1.645` gives 95%.
    pub fn lower_bound(&self, z: f64) -> Option<f64> {
        let p = self.accuracy()?;
        let n = self.pairs() as f64;
        Some(p - z * (p * (1.0 - p) / n).sqrt())
    }
}

/// Agreement of each strategy's preferences with the true relevance of the
/// query they are judged against; pairs of equal relevance are skipped.
pub fn strategy_accuracy(preferences: &[Preference], sidecar: &Sidecar) -> BTreeMap<Strategy, AccuracyCount> {
    let mut out: BTreeMap<Strategy, AccuracyCount> = BTreeMap::new();
    for p in preferences {
        let (Some(a), Some(b)) = (
            sidecar.relevance(&p.wrt_query, &p.preferred_doc),
            sidecar.relevance(&p.wrt_query, &p.other_doc),
        ) else {
            continue;
        };
        let entry = out.entry(p.strategy).or_default();
        if a > b {
            entry.agree += 1;
        } else if a < b {
            entry.disagree += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn intent(id: &str, relevant: &[&str], script: &[&str]) -> Intent {
        Intent {
            intent_id: id.into(),
            relevant_docs: relevant.iter().map(|d| (d.to_string(), 1.0)).collect(),
            query_script: script
                .iter()
                .map(|q| q.split_whitespace().map(str::to_owned).collect())
                .collect(),
        }
    }

    fn corpus() -> Corpus {
        Corpus::build(
            (0..20)
                .map(|i| Document::new(format!("d{i}"), format!("doc {i}"), "body"))
                .collect(),
        )
        .unwrap()
    }

    fn fixed_ranker(terms: &[String]) -> Vec<String> {
        let offset = terms.len();
        (0..10).map(|i| format!("d{}", (i + offset) % 20)).collect()
    }

    #[test]
    fn zero_sessions_is_empty() {
        let (log, sidecar) = simulate(
            &corpus(),
            &fixed_ranker,
            &[intent("a", &["d1"], &["x"])],
            &UserBehavior::default(),
            0,
            1,
        )
        .unwrap();
        assert!(log.is_empty());
        assert!(sidecar.records().is_empty());
    }

    #[test]
    fn same_seed_same_log() {
        let intents = [intent("a", &["d3"], &["x y", "x"]), intent("b", &["d5"], &["z"])];
        let run = || {
            let (log, _) = simulate(&corpus(), &fixed_ranker, &intents, &UserBehavior::default(), 40, 7).unwrap();
            crate::search_log::log_to_string(&log)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn scan_realism() {
        let intents = [intent("a", &["d3", "d7"], &["x y", "x"])];
        let behavior = UserBehavior {
            epsilon: 0.3,
            ..UserBehavior::default()
        };
        for s in 0..200 {
            let mut rng = rng_for(1, &format!("t{s}"));
            let session = simulate_session("s", 0, &intents, &behavior, &mut rng, &mut |t| fixed_ranker(t));
            for q in &session.queries {
                assert!(q.viewed >= 2.min(q.shown.len()));
                for &(rank, _) in &q.clicks {
                    assert!(rank as usize <= q.viewed);
                    if (rank as usize) < q.shown.len() {
                        assert!((rank as usize) < q.viewed);
                    }
                }
            }
        }
    }

    #[test]
    fn noiseless_users_click_only_relevant() {
        let intents = [intent("a", &["d3", "d7"], &["x y", "x"])];
        let behavior = UserBehavior {
            epsilon: 0.0,
            ..UserBehavior::default()
        };
        let (log, sidecar) = simulate(&corpus(), &fixed_ranker, &intents, &behavior, 100, 3).unwrap();
        for c in log.clicks() {
            assert_eq!(sidecar.relevance(&c.query_id, &c.doc_id), Some(1.0));
        }
    }

    #[test]
    fn accuracy_counts_skip_ties() {
        let sidecar = Sidecar::new(vec![SidecarRecord {
            qid: "q".into(),
            intent: "i".into(),
            relevance: [("a".to_owned(), 1.0), ("b".to_owned(), 1.0)].into_iter().collect(),
        }]);
        let pref = |p: &str, o: &str| Preference {
            preferred_doc: p.into(),
            other_doc: o.into(),
            wrt_query: "q".into(),
            strategy: Strategy::ClickSkipAbove,
            chain_id: "c".into(),
        };
        let acc = strategy_accuracy(&[pref("a", "b"), pref("a", "z"), pref("z", "b")], &sidecar);
        let s1 = acc[&Strategy::ClickSkipAbove];
        assert_eq!((s1.agree, s1.disagree), (1, 1));
        assert!(strategy_accuracy(&[], &sidecar).is_empty());
        assert_eq!(AccuracyCount::default().accuracy(), None);
    }

    #[test]
    fn invalid_behavior_is_rejected() {
        let behavior = UserBehavior {
            epsilon: 1.5,
            ..UserBehavior::default()
        };
        assert!(behavior.validate().is_err());
        let bad = Intent {
            intent_id: "x".into(),
            relevant_docs: BTreeMap::new(),
            query_script: vec![],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let intents = [intent("a", &["d3"], &["x"])];
        let (_, sidecar) = simulate(&corpus(), &fixed_ranker, &intents, &UserBehavior::default(), 5, 3).unwrap();
        let mut buf = Vec::new();
        sidecar.write(&mut buf).unwrap();
        assert_eq!(Sidecar::read(buf.as_slice()).unwrap(), sidecar);
    }
}
