//! Concept-bank and embedding retrieval for ad-hoc video search.
//!
//! Captions are parsed into constituency trees ([`treebank`]), mined for
//! noun/verb/phrase concepts that form a frequency-thresholded bank
//! ([`concepts`]), and turned into sparse concept vectors alongside dense
//! embeddings ([`vectors`]). [`engine`] ranks a corpus by concept, embedding
//! or fused cosine similarity, and [`eval`] scores the resulting runs.

pub mod concepts;
pub mod dataset;
pub mod engine;
pub mod eval;
pub mod treebank;
pub mod vectors;
