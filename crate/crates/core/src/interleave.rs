//! Balanced interleaving of two rankings, click attribution and the
//! binomial sign test over per-query outcomes.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// The first ranking, `r`.
    A,
    /// The second ranking, `r′`.
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    A,
    B,
    Tie,
}

/// The merged list with, for every prefix length `n`, how many results of
/// each input ranking were consumed to produce it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combined {
    pub docs: Vec<String>,
    /// `seen[n - 1] = (seen(n, r), seen(n, r′))`.
    pub seen: Vec<(usize, usize)>,
    pub first_pick: Side,
    a: Vec<String>,
    b: Vec<String>,
}

impl Combined {
    /// Consumption counts after the top `n` combined results; clamped to the
    /// full lists past the end and `(0, 0)` for `n = 0`.
    pub fn seen_at(&self, n: usize) -> (usize, usize) {
        if n == 0 {
            (0, 0)
        } else if n > self.seen.len() {
            (self.a.len(), self.b.len())
        } else {
            self.seen[n - 1]
        }
    }

    pub fn ranking(&self, side: Side) -> &[String] {
        match side {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }
}

/// Greedy balanced merge: take the next result from whichever ranking has
/// contributed less so far (the first pick breaks ties); a result already in
/// the combined list still consumes its turn.
pub fn combine(a: &[String], b: &[String], first_pick: Side) -> Combined {
    let (mut ka, mut kb) = (0usize, 0usize);
    let mut docs = Vec::with_capacity(a.len() + b.len());
    let mut seen = Vec::with_capacity(a.len() + b.len());
    let mut included: HashSet<&str> = HashSet::new();
    while ka < a.len() || kb < b.len() {
        let take_a = if ka >= a.len() {
            false
        } else if kb >= b.len() {
            true
        } else {
            ka < kb || (ka == kb && first_pick == Side::A)
        };
        let doc = if take_a {
            ka += 1;
            &a[ka - 1]
        } else {
            kb += 1;
            &b[kb - 1]
        };
        if included.insert(doc.as_str()) {
            docs.push(doc.clone());
            seen.push((ka, kb));
        }
    }
    Combined {
        docs,
        seen,
        first_pick,
        a: a.to_vec(),
        b: b.to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub clicks_a: usize,
    pub clicks_b: usize,
    /// 1-based position of the lowest click in the combined list; 0 if none.
    pub depth: usize,
    pub winner: Winner,
}

/// Credit clicks to each ranking: a click counts for a side if the document
/// is within that side's top `seen(depth, ·)` results.
pub fn attribute(combined: &Combined, clicked: &[String]) -> Result<Attribution> {
    let mut depth = 0;
    for doc in clicked {
        let pos = combined
            .docs
            .iter()
            .position(|d| d == doc)
            .ok_or_else(|| Error::ClickOutsideCombined(doc.clone()))?;
        depth = depth.max(pos + 1);
    }
    let (seen_a, seen_b) = combined.seen_at(depth);
    let clicked: HashSet<&str> = clicked.iter().map(String::as_str).collect();
    let count = |ranking: &[String], seen: usize| {
        ranking[..seen.min(ranking.len())]
            .iter()
            .filter(|d| clicked.contains(d.as_str()))
            .count()
    };
    let clicks_a = count(&combined.a, seen_a);
    let clicks_b = count(&combined.b, seen_b);
    let winner = match clicks_a.cmp(&clicks_b) {
        std::cmp::Ordering::Greater => Winner::A,
        std::cmp::Ordering::Less => Winner::B,
        std::cmp::Ordering::Equal => Winner::Tie,
    };
    Ok(Attribution {
        clicks_a,
        clicks_b,
        depth,
        winner,
    })
}

/// Exact two-sided binomial sign test under p = ½, ties already excluded.
pub fn sign_test(wins_a: u64, wins_b: u64) -> f64 {
    let n = wins_a + wins_b;
    if n == 0 {
        return 1.0;
    }
    let k = wins_a.max(wins_b);
    let binomial = Binomial::new(0.5, n).expect("valid binomial parameters");
    // P(X >= k) = 1 - P(X <= k - 1)
    let upper_tail = binomial.sf(k - 1);
    (2.0 * upper_tail).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub wins_a: u64,
    pub wins_b: u64,
    pub ties: u64,
}

impl Tally {
    pub fn record(&mut self, winner: Winner) {
        match winner {
            Winner::A => self.wins_a += 1,
            Winner::B => self.wins_b += 1,
            Winner::Tie => self.ties += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.wins_a + self.wins_b + self.ties
    }

    pub fn p_value(&self) -> f64 {
        sign_test(self.wins_a, self.wins_b)
    }

    pub fn merge(&mut self, other: &Tally) {
        self.wins_a += other.wins_a;
        self.wins_b += other.wins_b;
        self.ties += other.ties;
    }
}

/// Tallies keyed by comparison name.
pub type Tallies = BTreeMap<String, Tally>;
