//! Document ingestion, tokenization, the inverted index and the tf-idf
//! baseline retrieval function.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INDEX_FORMAT_VERSION: u32 = 1;

/// Default result-list length, matching the rank-feature cutoff.
pub const DEFAULT_K: usize = 100;

/// Lowercase and split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    /// Title tokens followed by body tokens.
    pub tokens: Vec<String>,
    /// Number of leading entries of `tokens` that came from the title.
    pub title_len: usize,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        let title = title.into();
        let body = body.into();
        let mut tokens = tokenize(&title);
        let title_len = tokens.len();
        tokens.extend(tokenize(&body));
        Document {
            doc_id: doc_id.into(),
            title,
            body,
            tokens,
            title_len,
        }
    }

    /// Title plus the first `words` body tokens; used as a result abstract.
    pub fn snippet(&self, words: usize) -> String {
        let body: Vec<&str> = self.tokens[self.title_len..]
            .iter()
            .take(words)
            .map(String::as_str)
            .collect();
        if body.is_empty() {
            self.title.clone()
        } else {
            format!("{} {}", self.title, body.join(" "))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Index into [`Corpus::documents`].
    pub doc: u32,
    /// Occurrences of the term anywhere in the document.
    pub tf: u32,
    /// Occurrences in the title (already included in `tf`).
    pub title_tf: u32,
}

impl Posting {
    /// Term frequency with title occurrences counted twice.
    pub fn weighted_tf(&self) -> u32 {
        self.tf + self.title_tf
    }
}

/// An immutable inverted index over a document collection.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    postings: BTreeMap<String, Vec<Posting>>,
    lookup: HashMap<String, usize>,
    doc_norms: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    documents: Vec<Document>,
    postings: BTreeMap<String, Vec<Posting>>,
}

impl Corpus {
    /// Build the index. Documents are stored sorted by id so the result does
    /// not depend on input order.
    pub fn build(documents: Vec<Document>) -> Result<Corpus> {
        let mut documents = documents;
        documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        if let Some(w) = documents.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
            return Err(Error::DuplicateDocId(w[0].doc_id.clone()));
        }

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (index, doc) in documents.iter().enumerate() {
            let mut counts: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
            for (pos, token) in doc.tokens.iter().enumerate() {
                let entry = counts.entry(token.as_str()).or_default();
                entry.0 += 1;
                if pos < doc.title_len {
                    entry.1 += 1;
                }
            }
            for (term, (tf, title_tf)) in counts {
                postings.entry(term.to_owned()).or_default().push(Posting {
                    doc: index as u32,
                    tf,
                    title_tf,
                });
            }
        }
        Ok(Self::assemble(documents, postings))
    }

    fn assemble(documents: Vec<Document>, postings: BTreeMap<String, Vec<Posting>>) -> Corpus {
        let lookup = documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i))
            .collect();
        let n = documents.len();
        let mut squared = vec![0.0f64; n];
        for list in postings.values() {
            let idf = idf(n, list.len());
            for p in list {
                let w = tf_weight(p.weighted_tf()) * idf;
                squared[p.doc as usize] += w * w;
            }
        }
        let doc_norms = squared.into_iter().map(f64::sqrt).collect();
        Corpus {
            documents,
            postings,
            lookup,
            doc_norms,
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.lookup.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.lookup.contains_key(doc_id)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    /// Baseline retrieval: tf-idf cosine with ln-scaled tf and smoothed idf.
    ///
    /// The query-vector norm is omitted since it is constant per query and
    /// does not change the order. Every returned document contains at least
    /// one query term; ties are broken by ascending doc id.
    pub fn base_retrieve(&self, query_id: &str, query_terms: &[String], k: usize) -> RankedList {
        let mut query_tf: BTreeMap<&str, u32> = BTreeMap::new();
        for t in query_terms {
            *query_tf.entry(t.as_str()).or_default() += 1;
        }
        let n = self.documents.len();
        let mut scores: BTreeMap<u32, f64> = BTreeMap::new();
        for (term, qtf) in query_tf {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let idf = idf(n, list.len());
            let query_weight = tf_weight(qtf) * idf;
            for p in list {
                let doc_weight = tf_weight(p.weighted_tf()) * idf;
                *scores.entry(p.doc).or_default() += query_weight * doc_weight / self.doc_norms[p.doc as usize];
            }
        }
        let mut hits: Vec<(u32, f64)> = scores.into_iter().collect();
        hits.sort_by(|a, b| {
            b.1.total_cmp(&a.1).then_with(|| {
                self.documents[a.0 as usize]
                    .doc_id
                    .cmp(&self.documents[b.0 as usize].doc_id)
            })
        });
        hits.truncate(k);
        RankedList {
            query_id: query_id.to_owned(),
            entries: hits
                .into_iter()
                .enumerate()
                .map(|(i, (doc, score))| RankedEntry {
                    doc_id: self.documents[doc as usize].doc_id.clone(),
                    score,
                    rank: i as u32 + 1,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = IndexFile {
            version: INDEX_FORMAT_VERSION,
            documents: self.documents.clone(),
            postings: self.postings.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Load a persisted index, refusing unknown versions and postings that do
    /// not match a rebuild from the stored documents.
    pub fn from_json(text: &str, origin: &Path) -> Result<Corpus> {
        let file: IndexFile = serde_json::from_str(text)?;
        if file.version != INDEX_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                path: origin.to_owned(),
                found: file.version,
                expected: INDEX_FORMAT_VERSION,
            });
        }
        let rebuilt = Corpus::build(file.documents)?;
        if rebuilt.postings != file.postings {
            return Err(Error::Structural {
                line: 1,
                message: "stored postings disagree with the stored documents".into(),
            });
        }
        Ok(rebuilt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Corpus> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Corpus::from_json(&text, path)
    }
}

fn tf_weight(tf: u32) -> f64 {
    1.0 + f64::from(tf).ln()
}

fn idf(n_docs: usize, df: usize) -> f64 {
    (1.0 + n_docs as f64 / df as f64).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub doc_id: String,
    pub score: f64,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn empty(query_id: &str) -> Self {
        RankedList {
            query_id: query_id.to_owned(),
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    pub fn rank_of(&self, doc_id: &str) -> Option<u32> {
        self.entries.iter().find(|e| e.doc_id == doc_id).map(|e| e.rank)
    }

    pub fn rank_map(&self) -> HashMap<&str, u32> {
        self.entries.iter().map(|e| (e.doc_id.as_str(), e.rank)).collect()
    }
}

#[derive(Deserialize)]
struct JsonDocument {
    doc_id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    body: String,
}

/// Read documents from a JSON-lines file of `{"doc_id","title","body"}` or
/// from a directory of UTF-8 text files (file name = doc id, first line =
/// title, remainder = body).
pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    if path.is_dir() {
        let mut docs = Vec::new();
        let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        let mut files: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for file in files {
            let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let (title, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
            let doc_id = file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            docs.push(Document::new(doc_id, title.trim_end_matches('\r'), body));
        }
        Ok(docs)
    } else {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut docs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: JsonDocument = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            docs.push(Document::new(doc.doc_id, doc.title, doc.body));
        }
        Ok(docs)
    }
}

/// Serialize documents as the JSON-lines corpus format.
pub fn documents_to_jsonl(docs: &[Document]) -> String {
    let mut out = String::new();
    for d in docs {
        let line = serde_json::json!({"doc_id": d.doc_id, "title": d.title, "body": d.body});
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}
