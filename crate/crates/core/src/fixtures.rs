//! A synthetic library-website corpus with eight scripted information needs.
//!
//! Background documents are made of generated pseudo-words plus a handful of
//! shared library words; the documents the intents need are written out by
//! hand. Several intents start with a query whose results contain nothing
//! relevant (a misspelling, jargon the relevant page never uses) and
//! continue with a query that finds it.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::corpus::{tokenize, Document};
use crate::seed::rng_for;
use crate::simulator::Intent;

/// (doc id, title, body)
const FIXTURE_DOCS: &[(&str, &str, &str)] = &[
    (
        "db-lexis-nexis",
        "Lexis Nexis academic",
        "full text news legal and business sources lexis nexis on campus and remote",
    ),
    (
        "guide-legal-research",
        "Legal research guide",
        "case law statutes and the nexis news archive for law students",
    ),
    (
        "guide-business",
        "Business databases",
        "company profiles market reports and industry news",
    ),
    (
        "rmc-rare-books",
        "Rare books and manuscripts",
        "rare books manuscripts archives and the reading room for primary sources",
    ),
    (
        "notes-special-committee",
        "Special committee on collections budget",
        "minutes of the special committee meeting on collections spending",
    ),
    (
        "policy-special-loans",
        "Special loans policy",
        "special loans of collections items to exhibitions",
    ),
    (
        "exhibit-birds",
        "Rare birds exhibit",
        "illustrated rare birds from the natural history books",
    ),
    (
        "book-sale",
        "Rare and used books sale",
        "rare books and used books for sale rare books every spring",
    ),
    (
        "ndlf-home",
        "National Digital Library Federation",
        "federation of research libraries building shared digital library infrastructure",
    ),
    (
        "notes-staff-0319",
        "Staff meeting notes March",
        "ndlf update budget review and staffing",
    ),
    (
        "notes-staff-0226",
        "Staff meeting notes February",
        "ndlf membership dues and web redesign",
    ),
    (
        "notes-staff-0417",
        "Staff meeting notes April",
        "ndlf forum report and digitization grants",
    ),
    (
        "digital-projects",
        "Digital library projects",
        "national digital library federation grants fund digital library projects and digital exhibits",
    ),
    (
        "hours-main",
        "Main library hours",
        "opening hours for the main library during term and holidays",
    ),
    (
        "hours-music",
        "Music library hours",
        "music library listening room and hours",
    ),
    ("hours-law", "Law library", "law library access for visitors"),
    (
        "ill-requests",
        "Interlibrary loan requests",
        "request books and articles not held locally through interlibrary loan delivery",
    ),
    (
        "ill-fees",
        "Interlibrary loan fees",
        "interlibrary loan fees fines and interlibrary loan charges",
    ),
    (
        "circulation-policy",
        "Circulation policy",
        "how to borrow materials and renew them",
    ),
    (
        "visitor-access",
        "Visitor access",
        "visitors from other institutions may use the libraries",
    ),
    (
        "reserves-readings",
        "Course reading reserves",
        "find readings placed on reserve by instructors for a course",
    ),
    (
        "naval-reserves",
        "Naval reserves history collection",
        "naval reserves reserves records and reserves rosters",
    ),
    (
        "course-catalog",
        "Course catalog",
        "course listings course numbers and course descriptions",
    ),
    (
        "citation-tools",
        "EndNote and RefWorks support",
        "workshops on endnote refworks and managing a citation library",
    ),
    (
        "citation-style",
        "Citation style guide",
        "citation formats for papers and citation examples",
    ),
    (
        "software-labs",
        "Software in computer labs",
        "software installed in public computer labs",
    ),
    (
        "maps-historical",
        "Historical cartography",
        "atlases charts surveys and cartography of the region",
    ),
    (
        "maps-campus",
        "Campus maps",
        "campus maps parking maps and building directions",
    ),
    ("old-newspapers", "Old newspapers", "old newspapers on microfilm"),
];

/// Shared words sprinkled into background documents so that common queries
/// return long, realistic result lists.
const SHARED_WORDS: &[&str] = &[
    "library",
    "books",
    "digital",
    "hours",
    "course",
    "software",
    "historical",
    "national",
    "access",
    "research",
    "students",
    "collection",
    "news",
    "records",
];

pub fn fixture_doc_count() -> usize {
    FIXTURE_DOCS.len()
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ren", "ta", "vos", "pel", "dra", "qui", "sem", "tor", "ba", "nul", "fi", "gar", "hex", "jo",
    "zim", "wen", "cor", "dal", "eru", "pon", "sil",
];

fn pseudo_vocabulary(size: usize, reserved: &BTreeSet<String>, seed: u64) -> Vec<String> {
    let mut rng = rng_for(seed, "fixture/vocabulary");
    let mut words = BTreeSet::new();
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let n = rng.random_range(2..=3);
        let word: String = (0..n)
            .map(|_| *SYLLABLES.choose(&mut rng).expect("syllables"))
            .collect();
        if !reserved.contains(&word) && words.insert(word.clone()) {
            out.push(word);
        }
    }
    out
}

/// Hand-written documents plus `background` generated ones; ids are unique.
pub fn fixture_corpus(background: usize, seed: u64) -> Vec<Document> {
    let mut docs: Vec<Document> = FIXTURE_DOCS
        .iter()
        .map(|(id, title, body)| Document::new(*id, *title, *body))
        .collect();
    let mut reserved: BTreeSet<String> = docs.iter().flat_map(|d| d.tokens.iter().cloned()).collect();
    for intent in fixture_intents() {
        reserved.extend(intent.query_script.into_iter().flatten());
    }
    let vocabulary = pseudo_vocabulary(600, &reserved, seed);
    let topics: Vec<&[String]> = vocabulary.chunks(15).collect();
    let mut rng = rng_for(seed, "fixture/documents");
    for i in 0..background {
        let topic = topics[rng.random_range(0..topics.len())];
        let pick = |rng: &mut crate::seed::StageRng| -> String {
            let r: f64 = rng.random();
            if r < 0.75 {
                topic.choose(rng).expect("topic words").clone()
            } else if r < 0.92 {
                vocabulary.choose(rng).expect("vocabulary").clone()
            } else {
                SHARED_WORDS.choose(rng).expect("shared words").to_string()
            }
        };
        let title: Vec<String> = (0..rng.random_range(2..=4)).map(|_| pick(&mut rng)).collect();
        let body: Vec<String> = (0..rng.random_range(20..=60)).map(|_| pick(&mut rng)).collect();
        docs.push(Document::new(format!("page-{i:04}"), title.join(" "), body.join(" ")));
    }
    docs
}

fn intent(id: &str, relevant: &[&str], script: &[&str]) -> Intent {
    Intent {
        intent_id: id.to_owned(),
        relevant_docs: relevant
            .iter()
            .map(|d| (d.to_string(), 1.0))
            .collect::<BTreeMap<_, _>>(),
        query_script: script.iter().map(|q| tokenize(q)).collect(),
    }
}

/// Eight needs: a misspelling, three vocabulary mismatches, two partial
/// mismatches, and two that the base ranking answers directly.
pub fn fixture_intents() -> Vec<Intent> {
    vec![
        intent("lexis-nexis", &["db-lexis-nexis"], &["lexus", "lexis nexis"]),
        intent(
            "rare-books",
            &["rmc-rare-books"],
            &["special collections", "rare books"],
        ),
        intent("ndlf", &["ndlf-home"], &["ndlf", "national digital library federation"]),
        intent("library-hours", &["hours-main"], &["library hours"]),
        intent(
            "interlibrary-loan",
            &["ill-requests"],
            &["borrow from other libraries", "interlibrary loan"],
        ),
        intent("course-reserves", &["reserves-readings"], &["course reserves"]),
        intent(
            "citation-manager",
            &["citation-tools"],
            &["citation software", "endnote refworks"],
        ),
        intent(
            "old-maps",
            &["maps-historical"],
            &["old maps", "historical cartography"],
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;

    #[test]
    fn corpus_is_valid_and_deterministic() {
        let a = fixture_corpus(200, 5);
        assert_eq!(a.len(), FIXTURE_DOCS.len() + 200);
        assert_eq!(a, fixture_corpus(200, 5));
        Corpus::build(a).unwrap();
    }

    #[test]
    fn intents_reference_fixture_docs() {
        let corpus = Corpus::build(fixture_corpus(50, 1)).unwrap();
        for intent in fixture_intents() {
            intent.validate().unwrap();
            for doc in intent.relevant_docs.keys() {
                assert!(corpus.contains(doc), "{doc}");
            }
        }
    }

    #[test]
    fn first_queries_behave_as_scripted() {
        let corpus = Corpus::build(fixture_corpus(1000, 1)).unwrap();
        let q = |s: &str| tokenize(s);
        assert!(corpus.base_retrieve("q", &q("lexus"), 100).is_empty());
        let special = corpus.base_retrieve("q", &q("special collections"), 100);
        assert!(special.rank_of("rmc-rare-books").is_none());
        assert!(
            corpus
                .base_retrieve("q", &q("rare books"), 100)
                .rank_of("rmc-rare-books")
                .unwrap()
                <= 3
        );
        assert!(corpus
            .base_retrieve("q", &q("ndlf"), 100)
            .rank_of("ndlf-home")
            .is_none());
        assert_eq!(
            corpus.base_retrieve("q", &q("lexis nexis"), 100).entries[0].doc_id,
            "db-lexis-nexis"
        );
        assert!(
            corpus
                .base_retrieve("q", &q("library hours"), 100)
                .rank_of("hours-main")
                .unwrap()
                <= 3
        );
    }
}
