//! Relative preference judgments from clicks within a query and across the
//! queries of a chain.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::chains::QueryChain;
use crate::error::{Error, Result};
use crate::search_log::{ClickEvent, QueryEvent};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Clicked document over every unclicked document ranked above it.
    #[serde(rename = "S1")]
    ClickSkipAbove,
    /// Clicked first result over an unclicked second result.
    #[serde(rename = "S2")]
    FirstNoClickSecond,
    /// S1 pairs, judged against the previous query of the chain.
    #[serde(rename = "S3")]
    ClickSkipAbovePrevQuery,
    /// S2 pairs, judged against the previous query of the chain.
    #[serde(rename = "S4")]
    FirstNoClickSecondPrevQuery,
    /// Clicked document over the unclicked results an earlier query showed
    /// down to one below its last click.
    #[serde(rename = "S5")]
    ClickSkipEarlierQuery,
    /// Clicked document over the top two results of an earlier query that
    /// received no click.
    #[serde(rename = "S6")]
    ClickTopTwoEarlierQuery,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::ClickSkipAbove,
        Strategy::FirstNoClickSecond,
        Strategy::ClickSkipAbovePrevQuery,
        Strategy::FirstNoClickSecondPrevQuery,
        Strategy::ClickSkipEarlierQuery,
        Strategy::ClickTopTwoEarlierQuery,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Strategy::ClickSkipAbove => "S1",
            Strategy::FirstNoClickSecond => "S2",
            Strategy::ClickSkipAbovePrevQuery => "S3",
            Strategy::FirstNoClickSecondPrevQuery => "S4",
            Strategy::ClickSkipEarlierQuery => "S5",
            Strategy::ClickTopTwoEarlierQuery => "S6",
        }
    }

    pub fn uses_chains(self) -> bool {
        !matches!(self, Strategy::ClickSkipAbove | Strategy::FirstNoClickSecond)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// `preferred_doc` is judged more relevant than `other_doc` for `wrt_query`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Preference {
    #[serde(rename = "pref")]
    pub preferred_doc: String,
    #[serde(rename = "over")]
    pub other_doc: String,
    #[serde(rename = "wrt")]
    pub wrt_query: String,
    pub strategy: Strategy,
    #[serde(rename = "chain")]
    pub chain_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    /// Within-query strategies only.
    Nc,
    /// All six strategies.
    Qc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeedbackOptions {
    /// Also apply the top-two strategy to earlier queries that did receive a
    /// click, skipping the clicked results.
    pub top_two_after_click: bool,
}

/// Draws padding documents for earlier queries whose result lists are too
/// short, as if they had been appended to the end of those lists.
#[derive(Debug, Clone)]
pub struct PaddingSource {
    doc_ids: Vec<String>,
    seed: u64,
}

impl PaddingSource {
    pub fn new(doc_ids: impl IntoIterator<Item = String>, seed: u64) -> Self {
        let mut doc_ids: Vec<String> = doc_ids.into_iter().collect();
        doc_ids.sort();
        doc_ids.dedup();
        PaddingSource { doc_ids, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `count` distinct documents not among `query`'s results, drawn
    /// uniformly from a stream keyed on the query id.
    pub fn draw(&self, query: &QueryEvent, count: usize) -> Vec<String> {
        if count == 0 {
            return Vec::new();
        }
        let shown: HashSet<&str> = query.results.iter().map(|r| r.doc_id.as_str()).collect();
        let pool: Vec<&String> = self.doc_ids.iter().filter(|d| !shown.contains(d.as_str())).collect();
        let mut rng = rng_for(self.seed, &format!("padding/{}", query.query_id));
        let count = count.min(pool.len());
        sample(&mut rng, pool.len(), count)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect()
    }
}

fn clicked_ranks(query: &QueryEvent, clicks: &[ClickEvent]) -> BTreeSet<u32> {
    clicks
        .iter()
        .filter(|c| query.doc_at(c.rank) == Some(c.doc_id.as_str()))
        .map(|c| c.rank)
        .collect()
}

/// (preferred, other, is_first_no_click_second) pairs of the two within-query
/// strategies, ordered by clicked rank then skipped rank.
fn within_pairs(query: &QueryEvent, clicks: &[ClickEvent]) -> Vec<(String, String, bool)> {
    let clicked = clicked_ranks(query, clicks);
    let mut pairs = Vec::new();
    for &k in &clicked {
        for j in 1..k {
            if !clicked.contains(&j) {
                pairs.push((doc(query, k), doc(query, j), false));
            }
        }
    }
    if clicked.contains(&1) && !clicked.contains(&2) && query.results.len() >= 2 {
        pairs.push((doc(query, 1), doc(query, 2), true));
    }
    pairs
}

fn doc(query: &QueryEvent, rank: u32) -> String {
    query.doc_at(rank).expect("rank within results").to_owned()
}

/// Within-query preferences (skip-above and first-over-second), judged
/// against the query itself.
pub fn prefs_within_query(query: &QueryEvent, clicks: &[ClickEvent], chain_id: &str) -> Vec<Preference> {
    within_pairs(query, clicks)
        .into_iter()
        .map(|(preferred, other, first_second)| Preference {
            preferred_doc: preferred,
            other_doc: other,
            wrt_query: query.query_id.clone(),
            strategy: if first_second {
                Strategy::FirstNoClickSecond
            } else {
                Strategy::ClickSkipAbove
            },
            chain_id: chain_id.to_owned(),
        })
        .collect()
}

/// Preferences that need the chain: within-query pairs re-targeted at the
/// immediately preceding query, and clicked documents against every earlier
/// query's viewed-but-skipped results.
pub fn prefs_cross_query(chain: &QueryChain, padding: &PaddingSource, options: FeedbackOptions) -> Vec<Preference> {
    let mut out = Vec::new();
    let make = |preferred: &str, other: &str, wrt: &QueryEvent, strategy| Preference {
        preferred_doc: preferred.to_owned(),
        other_doc: other.to_owned(),
        wrt_query: wrt.query_id.clone(),
        strategy,
        chain_id: chain.chain_id.clone(),
    };
    for i in 1..chain.queries.len() {
        let (query, clicks) = (&chain.queries[i], &chain.clicks[i]);
        let clicked = clicked_ranks(query, clicks);
        if clicked.is_empty() {
            continue;
        }
        let previous = &chain.queries[i - 1];
        for (preferred, other, first_second) in within_pairs(query, clicks) {
            let strategy = if first_second {
                Strategy::FirstNoClickSecondPrevQuery
            } else {
                Strategy::ClickSkipAbovePrevQuery
            };
            out.push(make(&preferred, &other, previous, strategy));
        }

        let clicked_docs: Vec<String> = clicked.iter().map(|&r| doc(query, r)).collect();
        for j in 0..i {
            let earlier = &chain.queries[j];
            let earlier_clicked = clicked_ranks(earlier, &chain.clicks[j]);
            let (strategy, others) = match earlier_clicked.last() {
                Some(&last) => {
                    let viewed = last as usize + 1;
                    let mut others: Vec<String> = (1..=viewed.min(earlier.results.len()) as u32)
                        .filter(|r| !earlier_clicked.contains(r))
                        .map(|r| doc(earlier, r))
                        .collect();
                    others.extend(padding.draw(earlier, viewed.saturating_sub(earlier.results.len())));
                    (Strategy::ClickSkipEarlierQuery, others)
                }
                None => {
                    let mut others: Vec<String> = earlier.results.iter().take(2).map(|r| r.doc_id.clone()).collect();
                    others.extend(padding.draw(earlier, 2 - others.len()));
                    (Strategy::ClickTopTwoEarlierQuery, others)
                }
            };
            for preferred in &clicked_docs {
                for other in others.iter().filter(|o| *o != preferred) {
                    out.push(make(preferred, other, earlier, strategy));
                }
            }
            if options.top_two_after_click && !earlier_clicked.is_empty() {
                for r in (1..=2u32).filter(|r| !earlier_clicked.contains(r)) {
                    if let Some(other) = earlier.doc_at(r) {
                        for preferred in clicked_docs.iter().filter(|p| p.as_str() != other) {
                            out.push(make(preferred, other, earlier, Strategy::ClickTopTwoEarlierQuery));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Preferences for a whole chain in canonical order: grouped by strategy,
/// generation order within a strategy.
pub fn prefs_for_chain(
    chain: &QueryChain,
    mode: FeedbackMode,
    padding: &PaddingSource,
    options: FeedbackOptions,
) -> Vec<Preference> {
    let mut prefs: Vec<Preference> = chain
        .queries
        .iter()
        .zip(&chain.clicks)
        .flat_map(|(q, clicks)| prefs_within_query(q, clicks, &chain.chain_id))
        .collect();
    if mode == FeedbackMode::Qc {
        prefs.extend(prefs_cross_query(chain, padding, options));
    }
    prefs.sort_by_key(|p| p.strategy);
    prefs
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PreferenceSet {
    pub preferences: Vec<Preference>,
    pub counts: BTreeMap<Strategy, usize>,
}

/// All preferences of a segmented log, kept as a multiset.
pub fn prefs_for_log(
    chains: &[QueryChain],
    mode: FeedbackMode,
    padding: &PaddingSource,
    options: FeedbackOptions,
) -> PreferenceSet {
    let preferences: Vec<Preference> = chains
        .iter()
        .flat_map(|c| prefs_for_chain(c, mode, padding, options))
        .collect();
    let mut counts: BTreeMap<Strategy, usize> = Strategy::ALL.iter().map(|&s| (s, 0)).collect();
    for p in &preferences {
        *counts.entry(p.strategy).or_default() += 1;
    }
    PreferenceSet { preferences, counts }
}

pub fn write_preferences(prefs: &[Preference], mut out: impl Write) -> std::io::Result<()> {
    for p in prefs {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_preferences(reader: impl BufRead) -> Result<Vec<Preference>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Preference = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if p.preferred_doc == p.other_doc {
            return Err(Error::Structural {
                line: i + 1,
                message: format!("self-preference on `{}`", p.preferred_doc),
            });
        }
        out.push(p);
    }
    Ok(out)
}
