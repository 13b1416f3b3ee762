//! Token normalization: lowercasing, stopword removal and a small rule-based
//! English lemmatizer.
//!
//! When part-of-speech tags are available (the tree path) only plural nouns
//! (`NNS`, `NNPS`) and inflected verbs (`VBD`, `VBG`, `VBN`, `VBZ`) are
//! lemmatized. Untagged input falls back to suffix heuristics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

const DEFAULT_STOPWORDS: &[&str] =
    &["a", "an", "the", "of", "'s", "his", "her", "its", "their", "my", "your", "our"];

const DEFAULT_AUXILIARIES: &[&str] = &["be", "is", "are", "was", "were", "been", "being"];

const DEFAULT_IRREGULAR_NOUNS: &[(&str, &str)] = &[
    ("men", "man"),
    ("women", "woman"),
    ("children", "child"),
    ("people", "person"),
    ("feet", "foot"),
];

const DEFAULT_IRREGULAR_VERBS: &[(&str, &str)] = &[
    ("held", "hold"),
    ("sat", "sit"),
    ("stood", "stand"),
    ("ran", "run"),
    ("sitting", "sit"),
    ("standing", "stand"),
    ("holding", "hold"),
    ("running", "run"),
];

/// Plural-looking nouns that are already in base form.
const INVARIANT_NOUNS: &[&str] = &[
    "news", "series", "species", "clothes", "pants", "jeans", "shorts", "scissors", "glasses",
    "sunglasses", "goggles", "physics", "mathematics", "gymnastics", "athletics", "headphones",
    "earphones", "stairs", "movies", "cookies", "lies", "ties", "pies",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizationConfig {
    pub stopwords: BTreeSet<String>,
    pub irregular_nouns: BTreeMap<String, String>,
    pub irregular_verbs: BTreeMap<String, String>,
    /// Excluded from verb word-concepts (matched against surface and lemma).
    pub auxiliary_verbs: BTreeSet<String>,
    pub min_phrase_tokens: usize,
    pub max_phrase_tokens: usize,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        let map = |xs: &[(&str, &str)]| xs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        NormalizationConfig {
            stopwords: set(DEFAULT_STOPWORDS),
            irregular_nouns: map(DEFAULT_IRREGULAR_NOUNS),
            irregular_verbs: map(DEFAULT_IRREGULAR_VERBS),
            auxiliary_verbs: set(DEFAULT_AUXILIARIES),
            min_phrase_tokens: 2,
            max_phrase_tokens: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {reason}")]
    BadValue { line: usize, key: String, reason: String },
    #[error("phrase length bounds must satisfy max >= min >= 2 (got min={min}, max={max})")]
    PhraseBounds { min: usize, max: usize },
}

/// Part-of-speech class that drives lemmatization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordClass {
    PluralNoun,
    InflectedVerb,
    Other,
    Unknown,
}

impl WordClass {
    pub fn from_tag(tag: &str) -> Self {
        match tag {
            "NNS" | "NNPS" => WordClass::PluralNoun,
            "VBD" | "VBG" | "VBN" | "VBZ" => WordClass::InflectedVerb,
            _ => WordClass::Other,
        }
    }
}

impl NormalizationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.min_phrase_tokens < 2 || self.max_phrase_tokens < self.min_phrase_tokens {
            return Err(ConfigError::PhraseBounds {
                min: self.min_phrase_tokens,
                max: self.max_phrase_tokens,
            });
        }
        Ok(())
    }

    /// Parses the plain `key = value` config format. Missing keys keep their
    /// defaults; list values are comma-separated; map entries are `from:to`.
    ///
    /// ```text
    /// # comment
    /// stopwords = a, an, the
    /// irregular_nouns = men:man, mice:mouse
    /// max_phrase_tokens = 3
    /// ```
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = NormalizationConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |reason: &str| ConfigError::BadValue {
                line,
                key: key.to_string(),
                reason: reason.to_string(),
            };
            match key {
                "stopwords" => cfg.stopwords = parse_list(value),
                "auxiliary_verbs" => cfg.auxiliary_verbs = parse_list(value),
                "irregular_nouns" => {
                    cfg.irregular_nouns = parse_map(value).ok_or_else(|| bad("expected from:to pairs"))?
                }
                "irregular_verbs" => {
                    cfg.irregular_verbs = parse_map(value).ok_or_else(|| bad("expected from:to pairs"))?
                }
                "min_phrase_tokens" => {
                    cfg.min_phrase_tokens = value.parse().map_err(|_| bad("expected an integer"))?
                }
                "max_phrase_tokens" => {
                    cfg.max_phrase_tokens = value.parse().map_err(|_| bad("expected an integer"))?
                }
                _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Writes every key; `parse(to_config_string())` reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let join_set = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(", ");
        let join_map = |m: &BTreeMap<String, String>| {
            m.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(", ")
        };
        let mut out = String::new();
        let _ = writeln!(out, "stopwords = {}", join_set(&self.stopwords));
        let _ = writeln!(out, "auxiliary_verbs = {}", join_set(&self.auxiliary_verbs));
        let _ = writeln!(out, "irregular_nouns = {}", join_map(&self.irregular_nouns));
        let _ = writeln!(out, "irregular_verbs = {}", join_map(&self.irregular_verbs));
        let _ = writeln!(out, "min_phrase_tokens = {}", self.min_phrase_tokens);
        let _ = writeln!(out, "max_phrase_tokens = {}", self.max_phrase_tokens);
        out
    }

    pub fn is_stopword(&self, lowered: &str) -> bool {
        self.stopwords.contains(lowered)
    }

    pub fn is_auxiliary(&self, lowered: &str, lemma: &str) -> bool {
        self.auxiliary_verbs.contains(lowered) || self.auxiliary_verbs.contains(lemma)
    }

    /// Lemma of an already-lowercased token.
    pub fn lemmatize(&self, lowered: &str, class: WordClass) -> String {
        if let Some(l) = self.irregular_nouns.get(lowered) {
            if matches!(class, WordClass::PluralNoun | WordClass::Unknown) {
                return l.clone();
            }
        }
        if let Some(l) = self.irregular_verbs.get(lowered) {
            if matches!(class, WordClass::InflectedVerb | WordClass::Unknown) {
                return l.clone();
            }
        }
        match class {
            WordClass::PluralNoun => singularize(lowered),
            WordClass::InflectedVerb => verb_base(lowered),
            WordClass::Other => lowered.to_string(),
            WordClass::Unknown => {
                if lowered.ends_with("ing") || lowered.ends_with("ed") {
                    verb_base(lowered)
                } else {
                    singularize(lowered)
                }
            }
        }
    }

    /// Normalizes one token; `None` means it is dropped (stopword or punctuation).
    pub fn normalize_one(&self, token: &str, class: WordClass) -> Option<String> {
        let lowered = token.to_lowercase();
        if !lowered.chars().any(char::is_alphanumeric) || self.is_stopword(&lowered) {
            return None;
        }
        let lemma = self.lemmatize(&lowered, class);
        if lemma.is_empty() || self.is_stopword(&lemma) {
            None
        } else {
            Some(lemma)
        }
    }

    /// Tag-aware normalization of `(tag, token)` pairs.
    pub fn normalize_tagged<'a, I>(&self, tagged: I) -> Vec<String>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        tagged
            .into_iter()
            .filter_map(|(tag, tok)| self.normalize_one(tok, WordClass::from_tag(tag)))
            .collect()
    }
}

/// Lowercases, removes stopwords and punctuation-only tokens, and lemmatizes
/// the rest with suffix heuristics. Order is preserved.
pub fn normalize_tokens<S: AsRef<str>>(tokens: &[S], cfg: &NormalizationConfig) -> Vec<String> {
    tokens
        .iter()
        .filter_map(|t| cfg.normalize_one(t.as_ref(), WordClass::Unknown))
        .collect()
}

fn parse_list(value: &str) -> BTreeSet<String> {
    value
        .split(',')
        .map(|s| s.trim().to_lowercase())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_map(value: &str) -> Option<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for entry in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (from, to) = entry.split_once(':')?;
        let (from, to) = (from.trim().to_lowercase(), to.trim().to_lowercase());
        if from.is_empty() || to.is_empty() {
            return None;
        }
        out.insert(from, to);
    }
    Some(out)
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|c| is_vowel(c) || c == b'y')
}

fn singularize(word: &str) -> String {
    if word.len() <= 3 || !word.is_ascii() || INVARIANT_NOUNS.contains(&word) {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if word.len() > 4 {
            return format!("{stem}y");
        }
    }
    for suffix in ["ches", "shes", "sses", "xes", "zes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    match word.strip_suffix('s') {
        Some(stem) => stem.to_string(),
        None => word.to_string(),
    }
}

fn verb_base(word: &str) -> String {
    if !word.is_ascii() {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ing") {
        if stem.len() >= 2 && has_vowel(stem) {
            return restore_stem(stem);
        }
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ied") {
        if word.len() > 4 {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = word.strip_suffix("ed") {
        if word.ends_with("eed") && word.len() <= 5 {
            // "need", "feed", "seed"
            return word.to_string();
        }
        if stem.len() >= 2 && has_vowel(stem) {
            return restore_stem(stem);
        }
        return word.to_string();
    }
    if word.len() <= 3 || word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if word.len() > 4 {
            return format!("{stem}y");
        }
        return word[..word.len() - 1].to_string();
    }
    for suffix in ["ches", "shes", "sses", "xes", "zes", "oes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    match word.strip_suffix('s') {
        Some(stem) => stem.to_string(),
        None => word.to_string(),
    }
}

/// Undoes consonant doubling (`sitt` -> `sit`) or restores a silent `e`
/// (`mak` -> `make`, `danc` -> `dance`) after an `-ing`/`-ed` strip.
fn restore_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    let last = b[n - 1];
    if n >= 3 && last == b[n - 2] && !is_vowel(last) && !matches!(last, b'l' | b's' | b'z' | b'f') {
        return stem[..n - 1].to_string();
    }
    if matches!(last, b'c' | b'v') || (last == b'u' && n >= 2 && !is_vowel(b[n - 2])) {
        return format!("{stem}e");
    }
    if is_short_cvc(b) {
        return format!("{stem}e");
    }
    stem.to_string()
}

/// A single-syllable stem ending consonant-vowel-consonant, where the final
/// consonant is not w, x or y.
fn is_short_cvc(b: &[u8]) -> bool {
    let n = b.len();
    if n < 3 {
        return false;
    }
    let (c1, v, c2) = (b[n - 3], b[n - 2], b[n - 1]);
    let consonant = |c: u8| !is_vowel(c) && c != b'y';
    if !(consonant(c1) && is_vowel(v) && consonant(c2)) || matches!(c2, b'w' | b'x' | b'y') {
        return false;
    }
    // one vowel group only
    b[..n - 2].iter().all(|&c| !is_vowel(c))
}
