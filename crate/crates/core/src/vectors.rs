//! Dense embeddings, sparse concept vectors and their similarity.
//!
//! Dense values are stored as `f32`; every dot product and norm accumulates
//! in `f64`.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, Read, Write};

use serde::Deserialize;
use thiserror::Error;

use crate::concepts::{extract_emissions, ConceptBank, NormalizationConfig};
use crate::treebank::ParseTree;

pub const DENSE_MAGIC: &[u8; 4] = b"AVSV";
pub const DENSE_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("item {id:?}: non-finite value")]
    NonFinite { id: String },
    #[error("item {id:?}: concept {concept} has invalid weight {weight}")]
    InvalidWeight { id: String, concept: u32, weight: f64 },
    #[error("item {id:?}: concept id {concept} outside bank of size {n}")]
    UnknownConcept { id: String, concept: u32, n: usize },
    #[error("document frequency table: {0}")]
    InvalidDf(String),
    #[error("not an AVSV file (bad magic)")]
    BadMagic,
    #[error("unsupported AVSV version {0}")]
    UnsupportedVersion(u16),
    #[error("record {index}: {message}")]
    Record { index: u64, message: String },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("read error: {0}")]
    Io(#[from] io::Error),
}

/// Dot product of two equal-length `f32` slices accumulated in `f64`.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| *x as f64 * *y as f64).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] as f64 * y[i] as f64;
        }
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

pub fn l2_norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity. `zero_vector` is set (and `score` is 0) when either
/// side has zero norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub score: f64,
    pub zero_vector: bool,
}

impl Cosine {
    pub(crate) fn from_parts(dot: f64, norm_a: f64, norm_b: f64) -> Self {
        if norm_a == 0.0 || norm_b == 0.0 {
            Cosine { score: 0.0, zero_vector: true }
        } else {
            Cosine { score: (dot / (norm_a * norm_b)).clamp(-1.0, 1.0), zero_vector: false }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub item_id: String,
    pub values: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn new(item_id: impl Into<String>, values: Vec<f32>) -> Self {
        EmbeddingRecord { item_id: item_id.into(), values }
    }
}

pub fn cosine_dense(a: &EmbeddingRecord, b: &EmbeddingRecord) -> Result<Cosine, VectorError> {
    cosine_slices(&a.values, &b.values)
}

pub fn cosine_slices(a: &[f32], b: &[f32]) -> Result<Cosine, VectorError> {
    if a.len() != b.len() {
        return Err(VectorError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(Cosine::from_parts(dot(a, b), l2_norm(a), l2_norm(b)))
}

/// Fixed-dimension collection of embeddings in one contiguous row-major block.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
}

impl DenseStore {
    pub fn new(dim: usize) -> Result<Self, VectorError> {
        if dim == 0 {
            return Err(VectorError::ZeroDimension);
        }
        Ok(DenseStore { dim, ids: Vec::new(), data: Vec::new() })
    }

    /// Wraps an existing row-major block of `ids.len() * dim` values.
    pub fn from_block(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self, VectorError> {
        if dim == 0 {
            return Err(VectorError::ZeroDimension);
        }
        if data.len() != ids.len() * dim {
            return Err(VectorError::DimensionMismatch { expected: ids.len() * dim, got: data.len() });
        }
        if let Some(row) = data.chunks_exact(dim).position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(VectorError::NonFinite { id: ids[row].clone() });
        }
        Ok(DenseStore { dim, ids, data })
    }

    pub fn push(&mut self, record: EmbeddingRecord) -> Result<(), VectorError> {
        if record.values.len() != self.dim {
            return Err(VectorError::DimensionMismatch { expected: self.dim, got: record.values.len() });
        }
        if record.values.iter().any(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite { id: record.item_id });
        }
        self.ids.push(record.item_id);
        self.data.extend_from_slice(&record.values);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids.iter().map(String::as_str).zip(self.data.chunks_exact(self.dim))
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.ids.iter().position(|x| x == id).map(|i| self.row(i))
    }

    pub fn into_parts(self) -> (usize, Vec<String>, Vec<f32>) {
        (self.dim, self.ids, self.data)
    }

    /// Binary `AVSV` format: magic, `u16` version, `u32` dim, `u64` count,
    /// then per record a `u32` id length, the id bytes and `dim` `f32`s, all
    /// little-endian.
    pub fn write_avsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(DENSE_MAGIC)?;
        w.write_all(&DENSE_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.dim * 4);
        for (id, row) in self.iter() {
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            buf.clear();
            for v in row {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()
    }

    pub fn read_avsv<R: Read>(mut r: R) -> Result<Self, VectorError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DENSE_MAGIC {
            return Err(VectorError::BadMagic);
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != DENSE_VERSION {
            return Err(VectorError::UnsupportedVersion(version));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8);
        let mut store = DenseStore::new(dim)?;
        let mut row = vec![0u8; dim * 4];
        for index in 0..count {
            let rec_err = |message: String| VectorError::Record { index, message };
            r.read_exact(&mut b4).map_err(|e| rec_err(e.to_string()))?;
            let len = u32::from_le_bytes(b4) as usize;
            let mut id = vec![0u8; len];
            r.read_exact(&mut id).map_err(|e| rec_err(e.to_string()))?;
            let id = String::from_utf8(id).map_err(|_| rec_err("id is not UTF-8".into()))?;
            r.read_exact(&mut row).map_err(|e| rec_err(e.to_string()))?;
            let values = row.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            store.push(EmbeddingRecord { item_id: id, values }).map_err(|e| rec_err(e.to_string()))?;
        }
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(VectorError::Record { index: count, message: "trailing bytes after last record".into() });
        }
        Ok(store)
    }
}

/// Sparse non-negative weights over bank ids, sorted by id, no explicit zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConceptVector {
    pub item_id: String,
    weights: Vec<(u32, f64)>,
}

impl ConceptVector {
    pub fn empty(item_id: impl Into<String>) -> Self {
        ConceptVector { item_id: item_id.into(), weights: Vec::new() }
    }

    /// Zero entries are dropped; negative or non-finite weights are rejected.
    pub fn from_map(item_id: impl Into<String>, map: &BTreeMap<u32, f64>) -> Result<Self, VectorError> {
        let item_id = item_id.into();
        let mut weights = Vec::with_capacity(map.len());
        for (&concept, &weight) in map {
            if !weight.is_finite() || weight < 0.0 {
                return Err(VectorError::InvalidWeight { id: item_id, concept, weight });
            }
            if weight > 0.0 {
                weights.push((concept, weight));
            }
        }
        Ok(ConceptVector { item_id, weights })
    }

    pub fn from_pairs<I>(item_id: impl Into<String>, pairs: I) -> Result<Self, VectorError>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        let mut map = BTreeMap::new();
        for (c, w) in pairs {
            *map.entry(c).or_insert(0.0) += w;
        }
        Self::from_map(item_id, &map)
    }

    pub fn weights(&self) -> &[(u32, f64)] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, concept: u32) -> f64 {
        self.weights
            .binary_search_by_key(&concept, |(c, _)| *c)
            .map_or(0.0, |i| self.weights[i].1)
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn max_concept(&self) -> Option<u32> {
        self.weights.last().map(|(c, _)| *c)
    }

    pub fn check_bank(&self, n: usize) -> Result<(), VectorError> {
        match self.max_concept() {
            Some(c) if c as usize >= n => Err(VectorError::UnknownConcept { id: self.item_id.clone(), concept: c, n }),
            _ => Ok(()),
        }
    }

    /// Scaled to unit L2 norm; the empty vector stays empty.
    pub fn normalized(&self) -> ConceptVector {
        let norm = self.norm();
        if norm == 0.0 {
            return self.clone();
        }
        ConceptVector {
            item_id: self.item_id.clone(),
            weights: self.weights.iter().map(|&(c, w)| (c, w / norm)).filter(|(_, w)| *w > 0.0).collect(),
        }
    }

    /// Keeps the `m` largest weights (ties resolved toward smaller ids).
    pub fn truncate_top(&self, m: usize) -> ConceptVector {
        if self.weights.len() <= m {
            return self.clone();
        }
        let mut ranked = self.weights.clone();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(m);
        ranked.sort_by_key(|(c, _)| *c);
        ConceptVector { item_id: self.item_id.clone(), weights: ranked }
    }

    /// One sparse-store JSONL line: `{"id":..., "w":{"<bank_id>":weight,...}}`
    /// with ids in ascending numeric order.
    pub fn to_json_line(&self) -> String {
        let id = serde_json::to_string(&self.item_id).expect("strings serialize");
        let body: Vec<String> = self.weights.iter().map(|(c, w)| format!("\"{c}\":{w}")).collect();
        format!("{{\"id\":{id},\"w\":{{{}}}}}", body.join(","))
    }
}

/// Cosine over the sparse intersection; in `[0, 1]` for non-negative weights.
pub fn cosine_sparse(a: &ConceptVector, b: &ConceptVector) -> Cosine {
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    let (wa, wb) = (a.weights(), b.weights());
    while i < wa.len() && j < wb.len() {
        match wa[i].0.cmp(&wb[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += wa[i].1 * wb[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    Cosine::from_parts(dot, a.norm(), b.norm())
}

#[derive(Deserialize)]
struct SparseLine {
    id: String,
    w: BTreeMap<String, f64>,
}

/// Reads a sparse-store JSONL stream. With `bank_size`, concept ids are
/// checked against it. `top_m` truncates each vector after reading.
pub fn read_sparse_jsonl<R: BufRead>(
    reader: R,
    bank_size: Option<usize>,
    top_m: Option<usize>,
) -> Result<Vec<ConceptVector>, VectorError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| VectorError::Line { line: line_no, message };
        let rec: SparseLine = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let mut map = BTreeMap::new();
        for (k, w) in rec.w {
            let c: u32 = k.parse().map_err(|_| err(format!("bad concept id {k:?}")))?;
            map.insert(c, w);
        }
        let mut v = ConceptVector::from_map(rec.id, &map).map_err(|e| err(e.to_string()))?;
        if let Some(n) = bank_size {
            v.check_bank(n).map_err(|e| err(e.to_string()))?;
        }
        if let Some(m) = top_m {
            v = v.truncate_top(m);
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_sparse_jsonl<W: Write>(vectors: &[ConceptVector], mut w: W) -> io::Result<()> {
    for v in vectors {
        writeln!(w, "{}", v.to_json_line())?;
    }
    w.flush()
}

/// How query-side concept weights are derived from extracted concepts.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightingScheme {
    Binary,
    TermFrequency,
    TfIdf(DocumentFrequencies),
}

/// Per-concept document frequencies over a corpus of `docs` sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentFrequencies {
    df: HashMap<u32, u64>,
    docs: u64,
}

impl DocumentFrequencies {
    pub fn new(df: HashMap<u32, u64>, docs: u64) -> Result<Self, VectorError> {
        if let Some((c, f)) = df.iter().find(|(_, &f)| f == 0 || f > docs) {
            return Err(VectorError::InvalidDf(format!("concept {c} has df={f} with {docs} documents")));
        }
        Ok(DocumentFrequencies { df, docs })
    }

    /// Uses bank frequencies (sentence counts) as document frequencies.
    pub fn from_bank(bank: &ConceptBank, docs: u64) -> Result<Self, VectorError> {
        Self::new(bank.entries().iter().map(|e| (e.id, e.frequency)).collect(), docs)
    }

    pub fn idf(&self, concept: u32) -> Option<f64> {
        self.df.get(&concept).map(|&f| (self.docs as f64 / f as f64).ln())
    }
}

/// Extracts concepts from a query tree and keeps those in the bank.
/// Out-of-bank concepts are dropped, so a fully out-of-vocabulary query
/// gives an empty vector.
pub fn text_to_concept_vector(
    item_id: &str,
    tree: &ParseTree,
    bank: &ConceptBank,
    scheme: &WeightingScheme,
    cfg: &NormalizationConfig,
) -> Result<ConceptVector, VectorError> {
    let mut map = BTreeMap::new();
    for e in extract_emissions(tree, cfg) {
        let Some(id) = bank.id_of(&e.concept.surface) else { continue };
        let tf = e.count as f64;
        let w = match scheme {
            WeightingScheme::Binary => 1.0,
            WeightingScheme::TermFrequency => tf,
            WeightingScheme::TfIdf(df) => {
                let idf = df.idf(id).ok_or_else(|| {
                    VectorError::InvalidDf(format!("no document frequency for concept {id}"))
                })?;
                tf * idf
            }
        };
        map.insert(id, w);
    }
    ConceptVector::from_map(item_id, &map)
}

/// Video-side concept vector built from the video's own captions: the sum of
/// per-caption term-frequency vectors, scaled to unit L2 norm.
pub fn captions_to_video_concept_vector<'a, I>(
    item_id: &str,
    trees: I,
    bank: &ConceptBank,
    cfg: &NormalizationConfig,
) -> ConceptVector
where
    I: IntoIterator<Item = &'a ParseTree>,
{
    let mut map: BTreeMap<u32, f64> = BTreeMap::new();
    for tree in trees {
        for e in extract_emissions(tree, cfg) {
            if let Some(id) = bank.id_of(&e.concept.surface) {
                *map.entry(id).or_insert(0.0) += e.count as f64;
            }
        }
    }
    ConceptVector::from_map(item_id, &map).expect("counts are positive and finite").normalized()
}
