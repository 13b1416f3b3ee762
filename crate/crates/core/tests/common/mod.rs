#![allow(dead_code)]

use std::collections::BTreeMap;

use avs_core::treebank::{Node, ParseTree};
use proptest::prelude::*;

pub const PHRASE_LABELS: &[&str] = &["S", "NP", "VP", "PP", "ADJP", "QP", "ADVP", "SBAR"];
pub const TAGS: &[&str] = &["NN", "NNS", "NNP", "VB", "VBD", "VBG", "VBZ", "DT", "JJ", "IN", "PRP$", "CD", "RB", "."];
pub const WORDS: &[&str] = &[
    "man", "men", "dog", "dogs", "running", "walks", "sat", "the", "a", "red", "young", "car", "cars", "is",
    "playing", "guitar", "in", "front", "of", "wall", "two", "three", "holding", "hand", "boxes", "children",
    "woman", "street", ".",
];

pub fn leaf() -> impl Strategy<Value = Node> {
    (prop::sample::select(TAGS), prop::sample::select(WORDS)).prop_map(|(t, w)| Node::leaf(t, w))
}

pub fn node() -> impl Strategy<Value = Node> {
    leaf().prop_recursive(5, 48, 4, |inner| {
        (prop::sample::select(PHRASE_LABELS), prop::collection::vec(inner, 1..4))
            .prop_map(|(l, kids)| Node::interior(l, kids))
    })
}

pub fn tree() -> impl Strategy<Value = ParseTree> {
    prop::collection::vec(node(), 1..4).prop_map(|kids| ParseTree::new(Node::interior("S", kids)))
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

use avs_core::concepts::{build_bank, ConceptBank, ConceptCounts, KindSet};
use avs_core::vectors::{ConceptVector, DenseStore, EmbeddingRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bank whose ids coincide with the numeric suffix of `c000`, `c001`, ...
pub fn numbered_bank(n: usize) -> ConceptBank {
    let mut counts = ConceptCounts::new();
    for i in 0..n {
        counts.insert(format!("c{i:03}"), 20, KindSet::parse("noun").unwrap());
    }
    build_bank(&counts, 20)
}

pub struct SyntheticCorpus {
    pub dim: usize,
    pub ids: Vec<String>,
    pub dense: Vec<Vec<f32>>,
    pub sparse: Vec<BTreeMap<u32, f64>>,
    pub bank: ConceptBank,
}

/// Random corpus: some items lack embeddings or concepts, never both.
/// Embedding values are small multiples of 1/8 so ties occur.
pub fn synthetic_corpus(seed: u64, n: usize, dim: usize, bank_size: usize) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::new();
    let mut dense = Vec::new();
    let mut sparse = Vec::new();
    for i in 0..n {
        ids.push(format!("v{i:05}"));
        let mode = rng.gen_range(0..6);
        let mut row: Vec<f32> = (0..dim).map(|_| rng.gen_range(-8i32..=8) as f32 / 8.0).collect();
        if mode == 0 || row.iter().all(|&x| x == 0.0) {
            row = vec![0.0; dim];
        }
        let mut m = BTreeMap::new();
        if mode != 1 {
            for _ in 0..rng.gen_range(0..5) {
                m.insert(rng.gen_range(0..bank_size as u32), rng.gen_range(1..4) as f64);
            }
        }
        if row.iter().all(|&x| x == 0.0) && m.is_empty() {
            m.insert(rng.gen_range(0..bank_size as u32), 1.0);
        }
        dense.push(row);
        sparse.push(m);
    }
    SyntheticCorpus { dim, ids, dense, sparse, bank: numbered_bank(bank_size) }
}

impl SyntheticCorpus {
    pub fn dense_store(&self) -> DenseStore {
        let mut store = DenseStore::new(self.dim).unwrap();
        for (id, row) in self.ids.iter().zip(&self.dense) {
            if row.iter().any(|&x| x != 0.0) {
                store.push(EmbeddingRecord::new(id.clone(), row.clone())).unwrap();
            }
        }
        store
    }

    pub fn concept_vectors(&self) -> Vec<ConceptVector> {
        self.ids
            .iter()
            .zip(&self.sparse)
            .filter(|(_, m)| !m.is_empty())
            .map(|(id, m)| ConceptVector::from_map(id.clone(), m).unwrap())
            .collect()
    }

    pub fn random_query(&self, rng: &mut ChaCha8Rng) -> (Vec<f32>, BTreeMap<u32, f64>) {
        let q: Vec<f32> = (0..self.dim).map(|_| rng.gen_range(-8i32..=8) as f32 / 8.0).collect();
        let mut m = BTreeMap::new();
        for _ in 0..rng.gen_range(0..4) {
            m.insert(rng.gen_range(0..self.bank.len() as u32), rng.gen_range(1..4) as f64);
        }
        (q, m)
    }
}

/// Straight-line f64 cosine; 0 when either side is all zeros.
pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        d / (na * nb)
    }
}

pub fn densify(m: &BTreeMap<u32, f64>, n: usize) -> Vec<f64> {
    (0..n as u32).map(|i| m.get(&i).copied().unwrap_or(0.0)).collect()
}

pub fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Checks that `run` is a correct top-k under the oracle scores: entries
/// match their oracle score, are ordered by (score desc, id asc) and nothing
/// left out beats the last kept score.
pub fn check_top_k(
    run: &[(String, f64)],
    oracle: &BTreeMap<String, f64>,
    k: usize,
    tol: f64,
) -> Result<(), String> {
    if run.len() != k.min(oracle.len()) {
        return Err(format!("length {} != {}", run.len(), k.min(oracle.len())));
    }
    for (id, s) in run {
        let want = oracle[id];
        if (s - want).abs() > tol {
            return Err(format!("{id}: score {s} vs oracle {want}"));
        }
    }
    for w in run.windows(2) {
        let ((a, sa), (b, sb)) = (&w[0], &w[1]);
        if sa < sb || (sa == sb && a >= b) {
            return Err(format!("order violated between {a} ({sa}) and {b} ({sb})"));
        }
    }
    if let Some((last_id, last)) = run.last() {
        let kept: std::collections::HashSet<&str> = run.iter().map(|(i, _)| i.as_str()).collect();
        for (id, s) in oracle {
            if kept.contains(id.as_str()) {
                continue;
            }
            if *s > last + tol || ((s - last).abs() <= tol && id < last_id && *s == oracle[last_id]) {
                return Err(format!("{id} ({s}) should outrank {last_id} ({last})"));
            }
        }
    }
    Ok(())
}
