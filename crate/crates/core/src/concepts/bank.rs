use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

use super::{Concept, ConceptCounts, KindSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankEntry {
    pub id: u32,
    pub concept: Concept,
    pub frequency: u64,
}

/// The concept vocabulary: dense ids `0..n`, ordered by frequency
/// (descending) then surface (ascending).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptBank {
    entries: Vec<BankEntry>,
    min_freq: u64,
    by_surface: HashMap<String, u32>,
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

const HEADER_PREFIX: &str = "#avs-bank v1";

impl ConceptBank {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_freq(&self) -> u64 {
        self.min_freq
    }

    pub fn entries(&self) -> &[BankEntry] {
        &self.entries
    }

    pub fn get(&self, id: u32) -> Option<&BankEntry> {
        self.entries.get(id as usize)
    }

    pub fn id_of(&self, surface: &str) -> Option<u32> {
        self.by_surface.get(surface).copied()
    }

    fn from_sorted(entries: Vec<BankEntry>, min_freq: u64) -> Self {
        let by_surface = entries.iter().map(|e| (e.concept.surface.clone(), e.id)).collect();
        ConceptBank { entries, min_freq, by_surface }
    }

    /// TSV form: a `#avs-bank v1 min_freq=<k> n=<n>` header, then one
    /// `id<TAB>surface<TAB>frequency<TAB>kinds` line per entry.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER_PREFIX} min_freq={} n={}", self.min_freq, self.entries.len());
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", e.id, e.concept.surface, e.frequency, e.concept.kinds);
        }
        out
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, BankError> {
        let mut lines = reader.lines().enumerate();
        let (min_freq, n) = match lines.next() {
            Some((_, header)) => parse_header(&header?).ok_or(BankError::Format {
                line: 1,
                message: format!("expected header `{HEADER_PREFIX} min_freq=<k> n=<n>`"),
            })?,
            None => return Err(BankError::Format { line: 1, message: "empty bank file".into() }),
        };
        let mut entries: Vec<BankEntry> = Vec::with_capacity(n);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| BankError::Format { line: line_no, message: message.to_string() };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(err("expected 4 tab-separated columns"));
            }
            let id: u32 = cols[0].parse().map_err(|_| err("bad id"))?;
            if id as usize != entries.len() {
                return Err(err("ids must be dense and in order"));
            }
            let surface = cols[1];
            if surface.is_empty()
                || surface != surface.to_lowercase()
                || surface.starts_with(' ')
                || surface.ends_with(' ')
                || surface.contains("  ")
            {
                return Err(err("surface must be lowercase single-spaced text"));
            }
            let frequency: u64 = cols[2].parse().map_err(|_| err("bad frequency"))?;
            if frequency < min_freq {
                return Err(err("frequency below min_freq"));
            }
            let kinds = KindSet::parse(cols[3]).ok_or_else(|| err("bad kinds"))?;
            if let Some(prev) = entries.last() {
                let ordered = prev.frequency > frequency
                    || (prev.frequency == frequency && prev.concept.surface.as_str() < surface);
                if !ordered {
                    return Err(err("entries must be ordered by frequency desc, surface asc"));
                }
            }
            entries.push(BankEntry { id, concept: Concept { surface: surface.to_string(), kinds }, frequency });
        }
        if entries.len() != n {
            return Err(BankError::Format {
                line: 1,
                message: format!("header declares n={n} but file has {} entries", entries.len()),
            });
        }
        Ok(Self::from_sorted(entries, min_freq))
    }
}

fn parse_header(line: &str) -> Option<(u64, usize)> {
    let rest = line.strip_prefix(HEADER_PREFIX)?;
    let mut min_freq = None;
    let mut n = None;
    for field in rest.split_whitespace() {
        let (k, v) = field.split_once('=')?;
        match k {
            "min_freq" => min_freq = Some(v.parse().ok()?),
            "n" => n = Some(v.parse().ok()?),
            _ => return None,
        }
    }
    Some((min_freq?, n?))
}

/// Keeps concepts with `frequency >= min_freq` and assigns ids in bank order.
pub fn build_bank(counts: &ConceptCounts, min_freq: u64) -> ConceptBank {
    let min_freq = min_freq.max(1);
    let mut kept: Vec<(&str, u64, KindSet)> = counts
        .iter()
        .filter(|(_, s)| s.frequency >= min_freq)
        .map(|(surface, s)| (surface, s.frequency, s.kinds))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let entries = kept
        .into_iter()
        .enumerate()
        .map(|(i, (surface, frequency, kinds))| BankEntry {
            id: i as u32,
            concept: Concept { surface: surface.to_string(), kinds },
            frequency,
        })
        .collect();
    ConceptBank::from_sorted(entries, min_freq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankStats {
    pub n: usize,
    pub phrase_count: usize,
    pub word_count: usize,
    /// Phrase counts in the bands `[min_freq, 50]`, `(50, 100]`, `(100, inf)`.
    pub band_counts: [usize; 3],
    /// `band_counts / phrase_count`; all zero when there are no phrases.
    pub band_fractions: [f64; 3],
    pub no_phrases: bool,
}

pub fn bank_stats(bank: &ConceptBank) -> BankStats {
    let mut band_counts = [0usize; 3];
    let mut phrase_count = 0;
    for e in bank.entries().iter().filter(|e| e.concept.is_phrase()) {
        phrase_count += 1;
        let band = match e.frequency {
            f if f <= 50 => 0,
            f if f <= 100 => 1,
            _ => 2,
        };
        band_counts[band] += 1;
    }
    let band_fractions = if phrase_count == 0 {
        [0.0; 3]
    } else {
        band_counts.map(|c| c as f64 / phrase_count as f64)
    };
    BankStats {
        n: bank.len(),
        phrase_count,
        word_count: bank.len() - phrase_count,
        band_counts,
        band_fractions,
        no_phrases: phrase_count == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::ConceptKind;

    fn counts(xs: &[(&str, u64)]) -> ConceptCounts {
        let mut c = ConceptCounts::new();
        for (s, f) in xs {
            let kind = if s.contains(' ') { ConceptKind::NounPhrase } else { ConceptKind::Noun };
            c.insert(*s, *f, KindSet::of(kind));
        }
        c
    }

    #[test]
    fn threshold_is_inclusive() {
        let bank = build_bank(&counts(&[("man", 25), ("rare phrase", 19)]), 20);
        assert_eq!(bank.len(), 1);
        assert_eq!(bank.id_of("man"), Some(0));
        assert_eq!(bank.id_of("rare phrase"), None);
        let bank = build_bank(&counts(&[("edge", 20)]), 20);
        assert_eq!(bank.len(), 1);
    }

    #[test]
    fn empty_bank() {
        let bank = build_bank(&ConceptCounts::new(), 20);
        assert!(bank.is_empty());
        let stats = bank_stats(&bank);
        assert_eq!(stats.n, 0);
        assert!(stats.no_phrases);
        assert_eq!(stats.band_fractions, [0.0; 3]);
    }

    #[test]
    fn ordering_rule() {
        let bank = build_bank(&counts(&[("a", 30), ("b", 30), ("c", 40)]), 20);
        let ids: Vec<_> = ["c", "a", "b"].iter().map(|s| bank.id_of(s).unwrap()).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn stats_bands() {
        let bank = build_bank(&counts(&[("p one", 20), ("p two", 40), ("p three", 150), ("word", 70)]), 20);
        let stats = bank_stats(&bank);
        assert_eq!(stats.n, 4);
        assert_eq!(stats.phrase_count, 3);
        assert_eq!(stats.band_counts, [2, 0, 1]);
        assert!((stats.band_fractions[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(stats.band_fractions[1], 0.0);
        assert!((stats.band_fractions[2] - 1.0 / 3.0).abs() < 1e-12);
        // 50 and 100 fall in the lower band
        let bank = build_bank(&counts(&[("p a", 50), ("p b", 100), ("p c", 101)]), 20);
        assert_eq!(bank_stats(&bank).band_counts, [1, 1, 1]);
    }

    #[test]
    fn tsv_round_trip() {
        let bank = build_bank(&counts(&[("young man", 30), ("man", 40), ("dog", 30)]), 20);
        let text = bank.to_tsv();
        assert!(text.starts_with("#avs-bank v1 min_freq=20 n=3\n0\tman\t40\tnoun\n"));
        let back = ConceptBank::read_tsv(text.as_bytes()).unwrap();
        assert_eq!(back, bank);
    }

    #[test]
    fn tsv_rejects_bad_files() {
        let cases = [
            "",
            "#avs-bank v2 min_freq=20 n=0\n",
            "#avs-bank v1 min_freq=20 n=2\n0\tman\t40\tnoun\n",
            "#avs-bank v1 min_freq=20 n=1\n1\tman\t40\tnoun\n",
            "#avs-bank v1 min_freq=20 n=1\n0\tman\t10\tnoun\n",
            "#avs-bank v1 min_freq=20 n=1\n0\tMan\t40\tnoun\n",
            "#avs-bank v1 min_freq=20 n=1\n0\tman\t40\tthing\n",
            "#avs-bank v1 min_freq=20 n=2\n0\tb\t40\tnoun\n1\ta\t50\tnoun\n",
        ];
        for case in cases {
            assert!(ConceptBank::read_tsv(case.as_bytes()).is_err(), "{case:?}");
        }
    }
}
