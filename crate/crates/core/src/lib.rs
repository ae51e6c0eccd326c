//! Learning ranked retrieval from query chains and click logs.
//!
//! A tf-idf base engine, a search-log model, query chain segmentation, six
//! implicit-feedback strategies, a bounded ranking SVM over rank and
//! term/document features, a reranker, balanced interleaving with a sign
//! test, a simulated user population, and a staged experiment pipeline.

pub mod chains;
pub mod corpus;
pub mod error;
pub mod features;
pub mod feedback;
pub mod fixtures;
pub mod interleave;
pub mod model;
pub mod pipeline;
pub mod ranker;
pub mod search_log;
pub mod seed;
pub mod simulator;
pub mod svm;

pub use error::{Error, Result};
