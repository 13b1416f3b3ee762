//! Word and phrase concept extraction from parse trees, corpus counting and
//! the frequency-thresholded concept bank.

mod bank;
mod normalize;

pub use bank::{bank_stats, build_bank, BankEntry, BankError, BankStats, ConceptBank};
pub use normalize::{normalize_tokens, ConfigError, NormalizationConfig, WordClass};

use std::collections::BTreeMap;
use std::fmt;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::treebank::{Node, ParseTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConceptKind {
    Noun,
    Verb,
    NounPhrase,
    VerbPhrase,
    AdjectivePhrase,
    PrepositionalPhrase,
    QuantifierPhrase,
}

impl ConceptKind {
    pub const ALL: [ConceptKind; 7] = [
        ConceptKind::Noun,
        ConceptKind::Verb,
        ConceptKind::NounPhrase,
        ConceptKind::VerbPhrase,
        ConceptKind::AdjectivePhrase,
        ConceptKind::PrepositionalPhrase,
        ConceptKind::QuantifierPhrase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConceptKind::Noun => "noun",
            ConceptKind::Verb => "verb",
            ConceptKind::NounPhrase => "np",
            ConceptKind::VerbPhrase => "vp",
            ConceptKind::AdjectivePhrase => "adjp",
            ConceptKind::PrepositionalPhrase => "pp",
            ConceptKind::QuantifierPhrase => "qp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ConceptKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Phrase kind for an interior constituent label.
    pub fn from_phrase_label(label: &str) -> Option<Self> {
        match label {
            "NP" => Some(ConceptKind::NounPhrase),
            "VP" => Some(ConceptKind::VerbPhrase),
            "ADJP" => Some(ConceptKind::AdjectivePhrase),
            "PP" => Some(ConceptKind::PrepositionalPhrase),
            "QP" => Some(ConceptKind::QuantifierPhrase),
            _ => None,
        }
    }

    pub fn is_phrase(self) -> bool {
        !matches!(self, ConceptKind::Noun | ConceptKind::Verb)
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// Set of [`ConceptKind`]s.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct KindSet(u8);

impl KindSet {
    pub fn empty() -> Self {
        KindSet(0)
    }

    pub fn of(kind: ConceptKind) -> Self {
        KindSet(kind.bit())
    }

    pub fn insert(&mut self, kind: ConceptKind) {
        self.0 |= kind.bit();
    }

    pub fn contains(self, kind: ConceptKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn union(self, other: KindSet) -> KindSet {
        KindSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = ConceptKind> {
        ConceptKind::ALL.into_iter().filter(move |k| self.contains(*k))
    }

    /// Parses the comma-joined form produced by `Display`.
    pub fn parse(text: &str) -> Option<KindSet> {
        let mut set = KindSet::empty();
        for name in text.split(',') {
            set.insert(ConceptKind::from_name(name.trim())?);
        }
        (!set.is_empty()).then_some(set)
    }
}

impl fmt::Display for KindSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(ConceptKind::name).collect();
        f.write_str(&names.join(","))
    }
}

impl FromIterator<ConceptKind> for KindSet {
    fn from_iter<I: IntoIterator<Item = ConceptKind>>(iter: I) -> Self {
        let mut set = KindSet::empty();
        for k in iter {
            set.insert(k);
        }
        set
    }
}

/// A normalized word or phrase. `surface` is lowercase tokens joined by single spaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub surface: String,
    pub kinds: KindSet,
}

impl Concept {
    pub fn token_count(&self) -> usize {
        self.surface.split(' ').count()
    }

    pub fn is_phrase(&self) -> bool {
        self.token_count() >= 2
    }
}

/// A concept together with how many times one sentence emitted it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub concept: Concept,
    pub count: u32,
}

fn leaf_tagged(node: &Node) -> impl Iterator<Item = (&str, &str)> {
    node.leaves().filter_map(|l| l.token().map(|t| (l.label(), t)))
}

/// Extracts word and phrase concepts with per-sentence emission counts, in
/// order of first emission during a pre-order walk.
///
/// Leaves tagged `NN*` give nouns and `VB*` give verbs (auxiliaries
/// excluded). `NP`, `VP`, `ADJP`, `PP` and `QP` constituents give phrases
/// when their normalized yield has between `min_phrase_tokens` and
/// `max_phrase_tokens` tokens. Every node is visited whether or not it emitted.
pub fn extract_emissions(tree: &ParseTree, cfg: &NormalizationConfig) -> Vec<Emission> {
    let mut out: Vec<Emission> = Vec::new();
    let mut slot: BTreeMap<String, usize> = BTreeMap::new();
    let mut emit = |surface: String, kind: ConceptKind| match slot.get(&surface) {
        Some(&i) => {
            out[i].concept.kinds.insert(kind);
            out[i].count += 1;
        }
        None => {
            slot.insert(surface.clone(), out.len());
            out.push(Emission { concept: Concept { surface, kinds: KindSet::of(kind) }, count: 1 });
        }
    };

    for node in tree.walk_nodes() {
        let label = node.label();
        if let Some(token) = node.token() {
            let word_kind = if label.starts_with("NN") {
                ConceptKind::Noun
            } else if label.starts_with("VB") {
                ConceptKind::Verb
            } else {
                continue;
            };
            let Some(lemma) = cfg.normalize_one(token, WordClass::from_tag(label)) else {
                continue;
            };
            if word_kind == ConceptKind::Verb && cfg.is_auxiliary(&token.to_lowercase(), &lemma) {
                continue;
            }
            if lemma.contains(char::is_whitespace) {
                continue;
            }
            emit(lemma, word_kind);
        } else if let Some(kind) = ConceptKind::from_phrase_label(label) {
            let tokens = cfg.normalize_tagged(leaf_tagged(node));
            if (cfg.min_phrase_tokens..=cfg.max_phrase_tokens).contains(&tokens.len()) {
                emit(tokens.join(" "), kind);
            }
        }
    }
    out
}

/// Concepts of one sentence, deduplicated by surface (kinds merged).
pub fn extract_concepts(tree: &ParseTree, cfg: &NormalizationConfig) -> Vec<Concept> {
    extract_emissions(tree, cfg).into_iter().map(|e| e.concept).collect()
}

/// Sentence frequency and kinds of one concept surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConceptStat {
    pub frequency: u64,
    pub kinds: KindSet,
}

/// Corpus-level concept counts. Frequency is the number of sentences that
/// emitted the concept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConceptCounts {
    counts: BTreeMap<String, ConceptStat>,
    sentences: u64,
}

impl ConceptCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sentence(&mut self, tree: &ParseTree, cfg: &NormalizationConfig) {
        self.sentences += 1;
        for concept in extract_concepts(tree, cfg) {
            let entry = self
                .counts
                .entry(concept.surface)
                .or_insert(ConceptStat { frequency: 0, kinds: KindSet::empty() });
            entry.frequency += 1;
            entry.kinds = entry.kinds.union(concept.kinds);
        }
    }

    /// Adds frequencies and unions kinds.
    pub fn merge(&mut self, other: ConceptCounts) {
        self.sentences += other.sentences;
        for (surface, stat) in other.counts {
            let entry = self
                .counts
                .entry(surface)
                .or_insert(ConceptStat { frequency: 0, kinds: KindSet::empty() });
            entry.frequency += stat.frequency;
            entry.kinds = entry.kinds.union(stat.kinds);
        }
    }

    pub fn get(&self, surface: &str) -> Option<ConceptStat> {
        self.counts.get(surface).copied()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of sentences counted.
    pub fn sentences(&self) -> u64 {
        self.sentences
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ConceptStat)> {
        self.counts.iter().map(|(s, c)| (s.as_str(), *c))
    }

    /// Inserts a raw count; used to build banks from precomputed statistics.
    pub fn insert(&mut self, surface: impl Into<String>, frequency: u64, kinds: KindSet) {
        let entry = self
            .counts
            .entry(surface.into())
            .or_insert(ConceptStat { frequency: 0, kinds: KindSet::empty() });
        entry.frequency += frequency;
        entry.kinds = entry.kinds.union(kinds);
    }
}

pub fn count_concepts<'a, I>(corpus: I, cfg: &NormalizationConfig) -> ConceptCounts
where
    I: IntoIterator<Item = &'a ParseTree>,
{
    let mut counts = ConceptCounts::new();
    for tree in corpus {
        counts.add_sentence(tree, cfg);
    }
    counts
}

/// Counts `shards` contiguous slices independently, then merges them in order.
/// The result equals `count_concepts` over the whole slice for any shard count.
pub fn count_concepts_sharded(trees: &[ParseTree], cfg: &NormalizationConfig, shards: usize) -> ConceptCounts {
    let shards = shards.max(1);
    let chunk = trees.len().div_ceil(shards).max(1);
    #[cfg(feature = "parallel")]
    let parts: Vec<ConceptCounts> = trees.par_chunks(chunk).map(|c| count_concepts(c, cfg)).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<ConceptCounts> = trees.chunks(chunk).map(|c| count_concepts(c, cfg)).collect();
    parts.into_iter().fold(ConceptCounts::new(), |mut acc, p| {
        acc.merge(p);
        acc
    })
}
