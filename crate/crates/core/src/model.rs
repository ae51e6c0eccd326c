//! Learned retrieval model `rel(d, q) = w · Φ(d, q)` and its file format.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSpace, SparseVector, RANK_FEATURES, THRESHOLDS};
use crate::svm::{Solution, TrainStatus};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub status: TrainStatus,
    pub iterations: usize,
    pub objective: f64,
    pub constraints: usize,
    pub dropped: usize,
    pub violations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub c: f64,
    pub w_min: f64,
    space: FeatureSpace,
    weights: Vec<f64>,
    pub meta: Option<TrainingMeta>,
    /// term → documents with a nonzero weight for that term, by doc id.
    by_term: HashMap<String, Vec<(String, f64)>>,
}

impl Model {
    /// Uniform rank weights at `w_min`, no term/document weights: ranks
    /// exactly like the base function.
    pub fn initial(space: FeatureSpace, w_min: f64) -> Model {
        let mut weights = vec![0.0; space.dim()];
        weights[..space.rank_dims()].fill(w_min);
        Self::assemble(1.0, w_min, space, weights, None)
    }

    pub fn from_solution(space: FeatureSpace, c: f64, w_min: f64, solution: &Solution, violations: usize) -> Model {
        let mut weights = solution.weights.clone();
        weights.resize(space.dim(), 0.0);
        let meta = TrainingMeta {
            status: solution.status,
            iterations: solution.iterations,
            objective: solution.objective,
            constraints: solution.constraints,
            dropped: solution.dropped,
            violations,
            label: None,
        };
        Self::assemble(c, w_min, space, weights, Some(meta))
    }

    fn assemble(c: f64, w_min: f64, space: FeatureSpace, weights: Vec<f64>, meta: Option<TrainingMeta>) -> Model {
        let mut by_term: HashMap<String, Vec<(String, f64)>> = HashMap::new();
        for (offset, (term, doc)) in space.term_docs().enumerate() {
            let w = weights[space.rank_dims() + offset];
            if w != 0.0 {
                by_term.entry(term.to_owned()).or_default().push((doc.to_owned(), w));
            }
        }
        for docs in by_term.values_mut() {
            docs.sort_by(|a, b| a.0.cmp(&b.0));
        }
        Model {
            c,
            w_min,
            space,
            weights,
            meta,
            by_term,
        }
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rank_weights(&self, function: usize) -> &[f64] {
        &self.weights[self.space.rank_block(function)]
    }

    pub fn term_weight(&self, term: &str, doc: &str) -> f64 {
        self.space
            .term_doc_id(term, doc)
            .map_or(0.0, |id| self.weights[id as usize])
    }

    /// Documents with a nonzero weight for `term`, sorted by doc id.
    pub fn docs_for_term(&self, term: &str) -> &[(String, f64)] {
        self.by_term.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn nonzero_term_weights(&self) -> usize {
        self.by_term.values().map(Vec::len).sum()
    }

    pub fn score_features(&self, phi: &SparseVector) -> f64 {
        phi.dot_dense(&self.weights)
    }

    /// Replace a term/document weight, interning the pair if needed.
    pub fn with_term_weight(mut self, term: &str, doc: &str, w: f64) -> Model {
        let id = self.space.intern(term, doc) as usize;
        self.weights.resize(self.space.dim(), 0.0);
        self.weights[id] = w;
        Self::assemble(self.c, self.w_min, self.space, self.weights, self.meta)
    }

    pub fn with_label(mut self, label: &str) -> Model {
        if let Some(meta) = &mut self.meta {
            meta.label = Some(label.to_owned());
        }
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let rank_weights = self
            .space
            .base_functions()
            .iter()
            .enumerate()
            .map(|(f, name)| (name.clone(), self.rank_weights(f).to_vec()))
            .collect();
        let term_doc_weights = self
            .space
            .term_docs()
            .enumerate()
            .map(|(offset, (term, doc))| TermDocWeight {
                term: term.to_owned(),
                doc: doc.to_owned(),
                w: self.weights[self.space.rank_dims() + offset],
            })
            .collect();
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            c: self.c,
            w_min: self.w_min,
            thresholds: THRESHOLDS.to_vec(),
            base_functions: self.space.base_functions().to_vec(),
            rank_weights,
            term_doc_weights,
            meta: self.meta.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Model> {
        let file: ModelFile = serde_json::from_str(text)?;
        let invalid = |message: String| Error::Structural { line: 1, message };
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                path: origin.to_owned(),
                found: file.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        if file.thresholds != THRESHOLDS {
            return Err(invalid("threshold list differs from the built-in rank cutoffs".into()));
        }
        let mut space = FeatureSpace::new(file.base_functions.clone());
        let mut weights = Vec::with_capacity(space.rank_dims() + file.term_doc_weights.len());
        for name in &file.base_functions {
            let block = file
                .rank_weights
                .get(name)
                .ok_or_else(|| invalid(format!("no rank weights for base function `{name}`")))?;
            if block.len() != RANK_FEATURES {
                return Err(invalid(format!(
                    "`{name}` has {} rank weights, expected {RANK_FEATURES}",
                    block.len()
                )));
            }
            if let Some(w) = block.iter().find(|&&w| w < file.w_min) {
                return Err(invalid(format!("rank weight {w} below w_min {}", file.w_min)));
            }
            weights.extend_from_slice(block);
        }
        for entry in &file.term_doc_weights {
            let id = space.intern(&entry.term, &entry.doc) as usize;
            if id != weights.len() {
                return Err(invalid(format!(
                    "duplicate term/doc pair ({}, {})",
                    entry.term, entry.doc
                )));
            }
            weights.push(entry.w);
        }
        Ok(Self::assemble(file.c, file.w_min, space, weights, file.meta))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text, path)
    }
}

#[derive(Serialize, Deserialize)]
struct TermDocWeight {
    term: String,
    doc: String,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    #[serde(rename = "C")]
    c: f64,
    w_min: f64,
    thresholds: Vec<u32>,
    base_functions: Vec<String>,
    rank_weights: BTreeMap<String, Vec<f64>>,
    term_doc_weights: Vec<TermDocWeight>,
    #[serde(default)]
    meta: Option<TrainingMeta>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::phi;

    #[test]
    fn initial_model_weights() {
        let m = Model::initial(FeatureSpace::single("base"), 1.0);
        assert_eq!(m.rank_weights(0), &[1.0; 28]);
        assert_eq!(m.nonzero_term_weights(), 0);
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let mut space = FeatureSpace::single("base");
        let q = vec!["rare".to_owned(), "books".to_owned()];
        let _ = phi(&mut space, "d1", &q, &[Some(3)]);
        let _ = phi(&mut space, "d2", &q, &[None]);
        let solution = Solution {
            weights: (0..space.dim()).map(|i| 1.0 + (i as f64) / 7.0).collect(),
            iterations: 12,
            objective: 0.1 + 0.2,
            status: TrainStatus::Converged,
            constraints: 3,
            dropped: 0,
        };
        let m = Model::from_solution(space, 1.0, 1.0, &solution, 0).with_label("qc");
        let json = m.to_json().unwrap();
        assert!(json.starts_with(r#"{"version":1,"C":1.0,"w_min":1.0,"thresholds":[1,2,3"#));
        let back = Model::from_json(&json, Path::new("mem")).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), json);
        assert_eq!(back.term_weight("books", "d2"), m.term_weight("books", "d2"));
    }

    #[test]
    fn refuses_other_versions_and_bad_bounds() {
        let m = Model::initial(FeatureSpace::single("base"), 1.0);
        let json = m.to_json().unwrap();
        let bumped = json.replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(
            Model::from_json(&bumped, Path::new("m")),
            Err(Error::VersionMismatch { .. })
        ));
        let low = json.replacen("\"w_min\":1.0", "\"w_min\":2.0", 1);
        assert!(Model::from_json(&low, Path::new("m")).is_err());
    }

    #[test]
    fn term_index_lists_nonzero_weights() {
        let m = Model::initial(FeatureSpace::single("base"), 1.0)
            .with_term_weight("lexus", "d9", 30.0)
            .with_term_weight("lexus", "d1", 0.0);
        assert_eq!(m.docs_for_term("lexus"), &[("d9".to_owned(), 30.0)]);
        assert_eq!(m.term_weight("lexus", "d9"), 30.0);
        assert!(m.docs_for_term("other").is_empty());
    }
}
