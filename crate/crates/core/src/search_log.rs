//! Query/click log records, their JSON-lines persistence, and grouping into
//! per-session event streams.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Results recorded per query are capped at the rank-feature cutoff.
pub const MAX_RESULTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultEntry {
    #[serde(rename = "doc")]
    pub doc_id: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryEvent {
    #[serde(rename = "qid")]
    pub query_id: String,
    #[serde(rename = "session")]
    pub session_id: String,
    #[serde(rename = "t")]
    pub timestamp: u64,
    pub terms: Vec<String>,
    pub results: Vec<ResultEntry>,
}

impl QueryEvent {
    pub fn doc_at(&self, rank: u32) -> Option<&str> {
        let index = (rank as usize).checked_sub(1)?;
        self.results.get(index).map(|r| r.doc_id.as_str())
    }

    pub fn rank_of(&self, doc_id: &str) -> Option<u32> {
        self.results
            .iter()
            .position(|r| r.doc_id == doc_id)
            .map(|i| i as u32 + 1)
    }

    /// Query text as the terms joined by single spaces.
    pub fn text(&self) -> String {
        self.terms.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickEvent {
    #[serde(rename = "qid")]
    pub query_id: String,
    #[serde(rename = "doc")]
    pub doc_id: String,
    pub rank: u32,
    #[serde(rename = "t")]
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogEvent {
    Query(QueryEvent),
    Click(ClickEvent),
}

impl LogEvent {
    pub fn timestamp(&self) -> u64 {
        match self {
            LogEvent::Query(q) => q.timestamp,
            LogEvent::Click(c) => c.timestamp,
        }
    }

    pub fn query_id(&self) -> &str {
        match self {
            LogEvent::Query(q) => &q.query_id,
            LogEvent::Click(c) => &c.query_id,
        }
    }
}

/// A validated, time-ordered stream of query and click events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchLog {
    events: Vec<LogEvent>,
    sessions_by_query: HashMap<String, String>,
}

impl SearchLog {
    /// Validate an event stream, reporting the 1-based position of the first
    /// offending event.
    pub fn from_events(events: Vec<LogEvent>) -> Result<SearchLog> {
        let mut validator = Validator::default();
        for (i, event) in events.iter().enumerate() {
            validator.check(event, i + 1)?;
        }
        Ok(SearchLog {
            events,
            sessions_by_query: validator.session_of_query,
        })
    }

    pub fn events(&self) -> &[LogEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn queries(&self) -> impl Iterator<Item = &QueryEvent> {
        self.events.iter().filter_map(|e| match e {
            LogEvent::Query(q) => Some(q),
            LogEvent::Click(_) => None,
        })
    }

    pub fn clicks(&self) -> impl Iterator<Item = &ClickEvent> {
        self.events.iter().filter_map(|e| match e {
            LogEvent::Click(c) => Some(c),
            LogEvent::Query(_) => None,
        })
    }

    pub fn session_of(&self, query_id: &str) -> Option<&str> {
        self.sessions_by_query.get(query_id).map(String::as_str)
    }

    /// Partition events by session, keeping stream order within each
    /// session (which is chronological by validation).
    pub fn group_sessions(&self) -> BTreeMap<String, Vec<LogEvent>> {
        let mut groups: BTreeMap<String, Vec<LogEvent>> = BTreeMap::new();
        for event in &self.events {
            let session = &self.sessions_by_query[event.query_id()];
            groups.entry(session.clone()).or_default().push(event.clone());
        }
        groups
    }
}

#[derive(Default)]
struct Validator {
    session_of_query: HashMap<String, String>,
    results_of_query: HashMap<String, Vec<String>>,
    last_time: HashMap<String, u64>,
}

impl Validator {
    fn check(&mut self, event: &LogEvent, line: usize) -> Result<()> {
        let structural = |message: String| Error::Structural { line, message };
        let session = match event {
            LogEvent::Query(q) => {
                if self.session_of_query.contains_key(&q.query_id) {
                    return Err(structural(format!("duplicate query id `{}`", q.query_id)));
                }
                if q.results.len() > MAX_RESULTS {
                    return Err(structural(format!(
                        "query `{}` has {} results (max {MAX_RESULTS})",
                        q.query_id,
                        q.results.len()
                    )));
                }
                let mut seen = HashSet::new();
                if let Some(dup) = q.results.iter().find(|r| !seen.insert(r.doc_id.as_str())) {
                    return Err(structural(format!(
                        "query `{}` lists `{}` twice",
                        q.query_id, dup.doc_id
                    )));
                }
                self.session_of_query.insert(q.query_id.clone(), q.session_id.clone());
                self.results_of_query
                    .insert(q.query_id.clone(), q.results.iter().map(|r| r.doc_id.clone()).collect());
                q.session_id.clone()
            }
            LogEvent::Click(c) => {
                let Some(session) = self.session_of_query.get(&c.query_id) else {
                    return Err(structural(format!(
                        "click references unknown query id `{}`",
                        c.query_id
                    )));
                };
                let results = &self.results_of_query[&c.query_id];
                let at_rank = (c.rank as usize).checked_sub(1).and_then(|i| results.get(i));
                if at_rank != Some(&c.doc_id) {
                    return Err(structural(format!(
                        "click on `{}` at rank {} does not match the results of `{}`",
                        c.doc_id, c.rank, c.query_id
                    )));
                }
                session.clone()
            }
        };
        let t = event.timestamp();
        if let Some(&previous) = self.last_time.get(&session) {
            if t < previous {
                return Err(structural(format!(
                    "timestamp {t} precedes {previous} in session `{session}`"
                )));
            }
        }
        self.last_time.insert(session, t);
        Ok(())
    }
}

/// Parse a JSON-lines log. Blank lines are skipped.
pub fn parse_log(reader: impl BufRead) -> Result<SearchLog> {
    let mut validator = Validator::default();
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let event: LogEvent = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        validator.check(&event, line_no)?;
        events.push(event);
    }
    Ok(SearchLog {
        events,
        sessions_by_query: validator.session_of_query,
    })
}

pub fn parse_log_str(text: &str) -> Result<SearchLog> {
    parse_log(text.as_bytes())
}

/// Canonical serialization: one record per line, LF terminated.
pub fn write_log(log: &SearchLog, mut out: impl Write) -> std::io::Result<()> {
    for event in log.events() {
        serde_json::to_writer(&mut out, event)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn log_to_string(log: &SearchLog) -> String {
    let mut buf = Vec::new();
    write_log(log, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// A query together with the clicks it received, in click order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryWithClicks {
    pub query: QueryEvent,
    pub clicks: Vec<ClickEvent>,
}

/// Collect each query of a single session's events with its clicks.
pub fn queries_with_clicks(session_events: &[LogEvent]) -> Vec<QueryWithClicks> {
    let mut out: Vec<QueryWithClicks> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for event in session_events {
        match event {
            LogEvent::Query(q) => {
                index.insert(&q.query_id, out.len());
                out.push(QueryWithClicks {
                    query: q.clone(),
                    clicks: Vec::new(),
                });
            }
            LogEvent::Click(c) => {
                if let Some(&i) = index.get(c.query_id.as_str()) {
                    out[i].clicks.push(c.clone());
                }
            }
        }
    }
    out
}
