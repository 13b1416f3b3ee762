//! Corpus index and exact top-k retrieval in concept, embedding and fusion
//! modes.
//!
//! Items are stored in ascending id order, so the tie rule (equal scores rank
//! by ascending item id) is the same as ascending ordinal.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Read, Write};
use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

use crate::concepts::{BankError, ConceptBank};
use crate::vectors::{dot, l2_norm, ConceptVector, Cosine, DenseStore, VectorError};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_K: usize = 1000;

const INDEX_MAGIC: &[u8; 4] = b"AVSI";
const INDEX_VERSION: u16 = 1;
#[cfg(feature = "parallel")]
const SCAN_CHUNK: usize = 1 << 15;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("dimension mismatch: index has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
    #[error("item {0:?} has neither an embedding nor a concept vector")]
    EmptyItem(String),
    #[error("query {query_id:?}: {mode} search needs {missing}")]
    ModeInputMissing { query_id: String, mode: SearchMode, missing: &'static str },
    #[error("query {query_id:?}: alpha must lie in [0, 1], got {alpha}")]
    InvalidAlpha { query_id: String, alpha: f64 },
    #[error("query {query_id:?}: k must be positive")]
    InvalidK { query_id: String },
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("index file: {0}")]
    Format(String),
    #[error("embedded bank: {0}")]
    Bank(#[from] BankError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchMode {
    Concept,
    Embedding,
    Fusion,
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Concept => "concept",
            SearchMode::Embedding => "embedding",
            SearchMode::Fusion => "fusion",
        })
    }
}

impl FromStr for SearchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "concept" => Ok(SearchMode::Concept),
            "embedding" => Ok(SearchMode::Embedding),
            "fusion" => Ok(SearchMode::Fusion),
            other => Err(format!("unknown search mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRequest {
    pub query_id: String,
    pub embedding: Option<Vec<f32>>,
    pub concept_vector: Option<ConceptVector>,
    pub mode: SearchMode,
    /// Weight of the embedding score in fusion mode.
    pub alpha: f64,
    /// Search length.
    pub k: usize,
}

impl SearchRequest {
    pub fn new(query_id: impl Into<String>, mode: SearchMode) -> Self {
        SearchRequest {
            query_id: query_id.into(),
            embedding: None,
            concept_vector: None,
            mode,
            alpha: DEFAULT_ALPHA,
            k: DEFAULT_K,
        }
    }

    pub fn with_embedding(mut self, values: Vec<f32>) -> Self {
        self.embedding = Some(values);
        self
    }

    pub fn with_concepts(mut self, vector: ConceptVector) -> Self {
        self.concept_vector = Some(vector);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    fn validate(&self) -> Result<(), EngineError> {
        let missing = |missing| EngineError::ModeInputMissing {
            query_id: self.query_id.clone(),
            mode: self.mode,
            missing,
        };
        let needs_emb = matches!(self.mode, SearchMode::Embedding | SearchMode::Fusion);
        let needs_con = matches!(self.mode, SearchMode::Concept | SearchMode::Fusion);
        if needs_emb && self.embedding.is_none() {
            return Err(missing("a query embedding"));
        }
        if needs_con && self.concept_vector.is_none() {
            return Err(missing("a query concept vector"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(EngineError::InvalidAlpha { query_id: self.query_id.clone(), alpha: self.alpha });
        }
        if self.k == 0 {
            return Err(EngineError::InvalidK { query_id: self.query_id.clone() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub item_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Ranked output for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct RunList {
    pub query_id: String,
    pub entries: Vec<RunEntry>,
}

impl RunList {
    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.item_id.as_str())
    }

    /// Drops entries ranked below `depth`.
    pub fn truncated(&self, depth: usize) -> RunList {
        RunList { query_id: self.query_id.clone(), entries: self.entries.iter().take(depth).cloned().collect() }
    }
}

/// Counters from one search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Concept-side partial products computed (one per posting visited).
    pub postings_visited: usize,
    /// Dense rows scored.
    pub rows_scored: usize,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    ordinal: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    /// Better candidates order first: higher score, then lower ordinal.
    fn cmp(&self, other: &Self) -> Ordering {
        other.score.total_cmp(&self.score).then(self.ordinal.cmp(&other.ordinal))
    }
}

/// Bounded max-heap keeping the `k` best candidates (the heap top is the worst kept).
struct TopK {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK { k, heap: BinaryHeap::with_capacity(k.min(1 << 16) + 1) }
    }

    #[inline]
    fn push(&mut self, score: f64, ordinal: u32) {
        // `+ 0.0` folds -0.0 into +0.0 so the two compare equal.
        let c = Candidate { score: score + 0.0, ordinal };
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if c < *worst {
                *worst = c;
            }
        }
    }

    #[cfg(feature = "parallel")]
    fn merge(mut self, other: TopK) -> TopK {
        for c in other.heap {
            self.push(c.score, c.ordinal);
        }
        self
    }

    fn into_sorted(self) -> Vec<Candidate> {
        self.heap.into_sorted_vec()
    }
}

/// In-memory corpus: ids, an `N x d` embedding block with row norms, and an
/// inverted index over concept ids.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    ids: Vec<String>,
    dim: usize,
    dense: Vec<f32>,
    dense_norms: Vec<f64>,
    postings: Vec<Vec<(u32, f64)>>,
    sparse_norms: Vec<f64>,
    bank: ConceptBank,
}

/// Builds an index over the union of both stores' ids.
pub fn build_index(
    embeddings: Option<&DenseStore>,
    concept_vectors: &[ConceptVector],
    bank: &ConceptBank,
) -> Result<CorpusIndex, EngineError> {
    CorpusIndex::build(embeddings.cloned(), concept_vectors.to_vec(), bank.clone())
}

impl CorpusIndex {
    /// Owning variant of [`build_index`]; reuses the embedding block when its
    /// ids are already sorted and cover the corpus.
    pub fn build(
        embeddings: Option<DenseStore>,
        concept_vectors: Vec<ConceptVector>,
        bank: ConceptBank,
    ) -> Result<CorpusIndex, EngineError> {
        let (dim, dense_ids, block) = match embeddings {
            Some(store) => store.into_parts(),
            None => (0, Vec::new(), Vec::new()),
        };
        {
            let mut seen = HashSet::with_capacity(dense_ids.len());
            for id in &dense_ids {
                if !seen.insert(id.as_str()) {
                    return Err(EngineError::DuplicateId(id.clone()));
                }
            }
            let mut seen = HashSet::with_capacity(concept_vectors.len());
            for v in &concept_vectors {
                if !seen.insert(v.item_id.as_str()) {
                    return Err(EngineError::DuplicateId(v.item_id.clone()));
                }
                v.check_bank(bank.len())?;
            }
        }

        let dense_sorted = dense_ids.windows(2).all(|w| w[0] < w[1]);
        let dense_pos: HashMap<&str, usize>;
        let mut ids: Vec<String>;
        let covers = dense_sorted && {
            let set: HashSet<&str> = dense_ids.iter().map(String::as_str).collect();
            concept_vectors.iter().all(|v| set.contains(v.item_id.as_str()))
        };
        let dense = if covers {
            ids = dense_ids;
            block
        } else {
            dense_pos = dense_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
            let mut union: Vec<String> = dense_ids.clone();
            union.extend(concept_vectors.iter().filter(|v| !dense_pos.contains_key(v.item_id.as_str())).map(|v| v.item_id.clone()));
            union.sort_unstable();
            let mut out = vec![0f32; union.len() * dim];
            for (ord, id) in union.iter().enumerate() {
                if let Some(&src) = dense_pos.get(id.as_str()) {
                    out[ord * dim..(ord + 1) * dim].copy_from_slice(&block[src * dim..(src + 1) * dim]);
                }
            }
            ids = union;
            out
        };
        ids.shrink_to_fit();

        let n = ids.len();
        let dense_norms: Vec<f64> = if dim == 0 { vec![0.0; n] } else { dense.chunks_exact(dim).map(l2_norm).collect() };

        let ordinal: HashMap<&str, u32> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i as u32)).collect();
        let mut sparse_norms = vec![0.0; n];
        let mut postings: Vec<Vec<(u32, f64)>> = vec![Vec::new(); bank.len()];
        let mut by_ordinal: Vec<(u32, &ConceptVector)> =
            concept_vectors.iter().map(|v| (ordinal[v.item_id.as_str()], v)).collect();
        by_ordinal.sort_unstable_by_key(|(o, _)| *o);
        for (ord, v) in by_ordinal {
            sparse_norms[ord as usize] = v.norm();
            for &(c, w) in v.weights() {
                postings[c as usize].push((ord, w));
            }
        }

        for (i, id) in ids.iter().enumerate() {
            if dense_norms[i] == 0.0 && sparse_norms[i] == 0.0 {
                return Err(EngineError::EmptyItem(id.clone()));
            }
        }

        Ok(CorpusIndex { ids, dim, dense, dense_norms, postings, sparse_norms, bank })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bank(&self) -> &ConceptBank {
        &self.bank
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn postings(&self, concept: u32) -> &[(u32, f64)] {
        self.postings.get(concept as usize).map_or(&[], Vec::as_slice)
    }

    fn row(&self, ordinal: usize) -> &[f32] {
        &self.dense[ordinal * self.dim..(ordinal + 1) * self.dim]
    }

    /// Embedding row of an item (all zeros when it has none).
    pub fn embedding(&self, item_id: &str) -> Option<&[f32]> {
        let ord = self.ids.binary_search_by(|x| x.as_str().cmp(item_id)).ok()?;
        Some(self.row(ord))
    }

    /// Concept vector of an item reconstructed from the postings.
    pub fn concept_vector(&self, item_id: &str) -> Option<ConceptVector> {
        let ord = self.ids.binary_search_by(|x| x.as_str().cmp(item_id)).ok()? as u32;
        let pairs = self.postings.iter().enumerate().filter_map(|(c, list)| {
            list.binary_search_by_key(&ord, |(o, _)| *o).ok().map(|i| (c as u32, list[i].1))
        });
        ConceptVector::from_pairs(item_id, pairs).ok()
    }

    pub fn search(&self, req: &SearchRequest) -> Result<RunList, EngineError> {
        self.search_with_stats(req).map(|(run, _)| run)
    }

    pub fn search_with_stats(&self, req: &SearchRequest) -> Result<(RunList, SearchStats), EngineError> {
        req.validate()?;
        let mut stats = SearchStats::default();
        let emb_query = match (req.mode, &req.embedding) {
            (SearchMode::Embedding | SearchMode::Fusion, Some(q)) => {
                if q.len() != self.dim {
                    return Err(EngineError::DimensionMismatch { expected: self.dim, got: q.len() });
                }
                if q.iter().any(|v| !v.is_finite()) {
                    return Err(VectorError::NonFinite { id: req.query_id.clone() }.into());
                }
                Some((q.as_slice(), l2_norm(q)))
            }
            _ => None,
        };
        let concept_query = match req.mode {
            SearchMode::Concept | SearchMode::Fusion => req.concept_vector.as_ref(),
            SearchMode::Embedding => None,
        };
        if let Some(v) = concept_query {
            v.check_bank(self.bank.len())?;
        }

        let top = match req.mode {
            SearchMode::Concept => {
                let v = concept_query.expect("validated");
                let (touched, visited) = self.concept_scores(v);
                stats.postings_visited = visited;
                let mut top = TopK::new(req.k);
                let mut is_touched = HashSet::with_capacity(touched.len());
                for &(ord, s) in &touched {
                    top.push(s, ord);
                    is_touched.insert(ord);
                }
                // Untouched items score exactly 0; only the first k by id can make the cut.
                let mut added = 0;
                for ord in 0..self.ids.len() as u32 {
                    if added == req.k {
                        break;
                    }
                    if !is_touched.contains(&ord) {
                        top.push(0.0, ord);
                        added += 1;
                    }
                }
                top
            }
            SearchMode::Embedding => {
                let (q, qn) = emb_query.expect("validated");
                stats.rows_scored = self.ids.len();
                self.scan(req.k, |ord| Cosine::from_parts(dot(q, self.row(ord)), qn, self.dense_norms[ord]).score)
            }
            SearchMode::Fusion => {
                let (q, qn) = emb_query.expect("validated");
                let v = concept_query.expect("validated");
                let (touched, visited) = self.concept_scores(v);
                stats.postings_visited = visited;
                stats.rows_scored = self.ids.len();
                let mut concept = vec![0.0; self.ids.len()];
                for (ord, s) in touched {
                    concept[ord as usize] = s;
                }
                let alpha = req.alpha;
                self.scan(req.k, |ord| {
                    let e = Cosine::from_parts(dot(q, self.row(ord)), qn, self.dense_norms[ord]).score;
                    alpha * e + (1.0 - alpha) * concept[ord]
                })
            }
        };

        let entries = top
            .into_sorted()
            .into_iter()
            .enumerate()
            .map(|(i, c)| RunEntry { item_id: self.ids[c.ordinal as usize].clone(), score: c.score, rank: i + 1 })
            .collect();
        Ok((RunList { query_id: req.query_id.clone(), entries }, stats))
    }

    /// Cosine scores of items sharing at least one concept with the query,
    /// plus the number of postings visited.
    fn concept_scores(&self, q: &ConceptVector) -> (Vec<(u32, f64)>, usize) {
        let qn = q.norm();
        let mut acc: HashMap<u32, f64> = HashMap::new();
        let mut visited = 0;
        for &(c, qw) in q.weights() {
            let list = &self.postings[c as usize];
            visited += list.len();
            for &(ord, w) in list {
                *acc.entry(ord).or_insert(0.0) += qw * w;
            }
        }
        let mut out: Vec<(u32, f64)> = acc
            .into_iter()
            .map(|(ord, d)| (ord, Cosine::from_parts(d, qn, self.sparse_norms[ord as usize]).score))
            .collect();
        out.sort_unstable_by_key(|(o, _)| *o);
        (out, visited)
    }

    fn scan<F>(&self, k: usize, score: F) -> TopK
    where
        F: Fn(usize) -> f64 + Sync,
    {
        let n = self.ids.len();
        #[cfg(feature = "parallel")]
        if n > SCAN_CHUNK && rayon::current_num_threads() > 1 {
            let chunks: Vec<usize> = (0..n).step_by(SCAN_CHUNK).collect();
            return chunks
                .into_par_iter()
                .map(|start| {
                    let mut top = TopK::new(k);
                    for ord in start..(start + SCAN_CHUNK).min(n) {
                        top.push(score(ord), ord as u32);
                    }
                    top
                })
                .reduce(|| TopK::new(k), TopK::merge);
        }
        let mut top = TopK::new(k);
        for ord in 0..n {
            top.push(score(ord), ord as u32);
        }
        top
    }

    /// Serializes the index (embedded bank, ids, embeddings, concept vectors).
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(INDEX_MAGIC)?;
        w.write_all(&INDEX_VERSION.to_le_bytes())?;
        let bank = self.bank.to_tsv();
        w.write_all(&(bank.len() as u64).to_le_bytes())?;
        w.write_all(bank.as_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        let vectors = self.all_concept_vectors();
        let mut buf = Vec::new();
        for (ord, id) in self.ids.iter().enumerate() {
            buf.clear();
            buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
            for v in self.row(ord) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            let weights = &vectors[ord];
            buf.extend_from_slice(&(weights.len() as u32).to_le_bytes());
            for &(c, wt) in weights {
                buf.extend_from_slice(&c.to_le_bytes());
                buf.extend_from_slice(&wt.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()
    }

    fn all_concept_vectors(&self) -> Vec<Vec<(u32, f64)>> {
        let mut out = vec![Vec::new(); self.ids.len()];
        for (c, list) in self.postings.iter().enumerate() {
            for &(ord, w) in list {
                out[ord as usize].push((c as u32, w));
            }
        }
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<CorpusIndex, EngineError> {
        let bad = |m: &str| EngineError::Format(m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(bad("not an AVSI index (bad magic)"));
        }
        let mut b2 = [0u8; 2];
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b2)?;
        if u16::from_le_bytes(b2) != INDEX_VERSION {
            return Err(bad("unsupported index version"));
        }
        r.read_exact(&mut b8)?;
        let mut bank_bytes = vec![0u8; u64::from_le_bytes(b8) as usize];
        r.read_exact(&mut bank_bytes)?;
        let bank = ConceptBank::read_tsv(&bank_bytes[..])?;
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;

        let mut store = if dim > 0 { Some(DenseStore::new(dim)?) } else { None };
        let mut vectors = Vec::new();
        let mut row = vec![0u8; dim * 4];
        for _ in 0..n {
            r.read_exact(&mut b4)?;
            let mut id = vec![0u8; u32::from_le_bytes(b4) as usize];
            r.read_exact(&mut id)?;
            let id = String::from_utf8(id).map_err(|_| bad("item id is not UTF-8"))?;
            r.read_exact(&mut row)?;
            if let Some(store) = store.as_mut() {
                let values = row.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
                store.push(crate::vectors::EmbeddingRecord::new(id.clone(), values))?;
            }
            r.read_exact(&mut b4)?;
            let nnz = u32::from_le_bytes(b4) as usize;
            let mut pairs = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                r.read_exact(&mut b4)?;
                r.read_exact(&mut b8)?;
                pairs.push((u32::from_le_bytes(b4), f64::from_le_bytes(b8)));
            }
            if nnz > 0 {
                vectors.push(ConceptVector::from_pairs(id, pairs)?);
            }
        }
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(bad("trailing bytes"));
        }
        CorpusIndex::build(store, vectors, bank)
    }
}

/// Maps `search` over the requests on a pool of `threads` workers. Output
/// order follows the input and does not depend on the thread count; a failed
/// request does not stop the others.
pub fn batch_search(
    index: &CorpusIndex,
    requests: &[SearchRequest],
    threads: usize,
) -> Vec<Result<RunList, EngineError>> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .expect("thread pool");
        pool.install(|| requests.par_iter().map(|r| index.search(r)).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        requests.iter().map(|r| index.search(r)).collect()
    }
}

/// Writes TREC 6-column run lines: `query_id Q0 item_id rank score tag`.
pub fn write_run<W: Write>(runs: &[RunList], tag: &str, mut w: W) -> io::Result<()> {
    for run in runs {
        for e in &run.entries {
            writeln!(w, "{} Q0 {} {} {:.6} {}", run.query_id, e.item_id, e.rank, e.score, tag)?;
        }
    }
    w.flush()
}

#[derive(Debug, Error)]
pub enum RunFileError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("read error: {0}")]
    Io(#[from] io::Error),
}

/// Parses a TREC run file. Entries of each query are ordered by the rank
/// column; queries keep their order of first appearance.
pub fn read_run<R: BufRead>(reader: R) -> Result<Vec<RunList>, RunFileError> {
    let mut runs: Vec<RunList> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    let mut seen: HashSet<(usize, String)> = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: &str| RunFileError::Format { line: line_no, message: m.to_string() };
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(err("expected 6 columns: query_id Q0 item_id rank score tag"));
        }
        let rank: usize = cols[3].parse().map_err(|_| err("bad rank"))?;
        if rank == 0 {
            return Err(err("ranks start at 1"));
        }
        let score: f64 = cols[4].parse().map_err(|_| err("bad score"))?;
        if !score.is_finite() {
            return Err(err("non-finite score"));
        }
        let q = *slot.entry(cols[0].to_string()).or_insert_with(|| {
            runs.push(RunList { query_id: cols[0].to_string(), entries: Vec::new() });
            runs.len() - 1
        });
        if !seen.insert((q, cols[2].to_string())) {
            return Err(err("item listed twice for the same query"));
        }
        runs[q].entries.push(RunEntry { item_id: cols[2].to_string(), score, rank });
    }
    for run in &mut runs {
        run.entries.sort_by_key(|e| e.rank);
        if run.entries.windows(2).any(|w| w[0].rank == w[1].rank) {
            return Err(RunFileError::Format {
                line: 0,
                message: format!("query {:?} repeats a rank", run.query_id),
            });
        }
    }
    Ok(runs)
}
