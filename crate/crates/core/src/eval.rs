//! Ranked-retrieval metrics: AP/mAP with unjudged items counted as
//! non-relevant, inferred AP over stratified sampled judgments (mean =
//! xinfAP), recall@K and median rank of the first relevant item.
//!
//! Inferred AP follows the stratified estimator of the TREC `sample_eval`
//! tool. For stratum `s` with sampling rate `p_s`:
//!
//! ```text
//! R_hat   = sum_s relevant_judged(s) / p_s
//! E[P@1]  = 1
//! E[P@k]  = 1/k + (k-1)/k * sum_s |pool_s ∩ top(k-1)| / (k-1)
//!                              * (rel_s + eps) / (rel_s + nonrel_s + 2 eps)
//! infAP   = (1 / R_hat) * sum over judged-relevant ranks k of E[P@k] / p_s(k)
//! ```
//!
//! where `rel_s`/`nonrel_s` count judged items of stratum `s` above rank `k`
//! and `s(k)` is the stratum of the relevant item at rank `k`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::RunList;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_DEPTH: usize = 1000;
pub const RECALL_CUTOFFS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("query {query:?}: item {item:?} judged twice")]
    DuplicateJudgment { query: String, item: String },
    #[error("query {query:?}: judged item {item:?} is not a member of stratum {stratum:?}")]
    StratumViolation { query: String, stratum: String, item: String },
    #[error("query {query:?}: stratum {stratum:?} has no entry in the strata file")]
    UndeclaredStratum { query: String, stratum: String },
    #[error("query {query:?}, stratum {stratum:?}: {message}")]
    BadStratum { query: String, stratum: String, message: String },
    #[error("query {query:?}: item {item:?} belongs to strata {first:?} and {second:?}")]
    OverlappingStrata { query: String, item: String, first: String, second: String },
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Judgment {
    Relevant,
    NonRelevant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgedItem {
    pub judgment: Judgment,
    pub stratum: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryQrels {
    items: HashMap<String, JudgedItem>,
    relevant: usize,
}

impl QueryQrels {
    pub fn judgment(&self, item: &str) -> Option<Judgment> {
        self.items.get(item).map(|j| j.judgment)
    }

    pub fn relevant_count(&self) -> usize {
        self.relevant
    }

    pub fn items(&self) -> impl Iterator<Item = (&str, &JudgedItem)> {
        self.items.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Relevance judgments keyed by query, each item tagged with its stratum.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    queries: BTreeMap<String, QueryQrels>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: &str, stratum: &str, item: &str, judgment: Judgment) -> Result<(), EvalError> {
        let q = self.queries.entry(query.to_string()).or_default();
        if q.items.contains_key(item) {
            return Err(EvalError::DuplicateJudgment { query: query.into(), item: item.into() });
        }
        if judgment == Judgment::Relevant {
            q.relevant += 1;
        }
        q.items.insert(item.to_string(), JudgedItem { judgment, stratum: stratum.to_string() });
        Ok(())
    }

    pub fn query(&self, id: &str) -> Option<&QueryQrels> {
        self.queries.get(id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Parses `query_id stratum_id item_id judgment` lines (judgment 0 or 1).
    pub fn read<R: BufRead>(reader: R) -> Result<Qrels, EvalError> {
        let mut qrels = Qrels::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: &str| EvalError::Format { line: line_no, message: m.to_string() };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(err("expected 4 columns: query_id stratum_id item_id judgment"));
            }
            let judgment = match cols[3] {
                "0" => Judgment::NonRelevant,
                "1" => Judgment::Relevant,
                _ => return Err(err("judgment must be 0 or 1")),
            };
            qrels.insert(cols[0], cols[1], cols[2], judgment).map_err(|e| err(&e.to_string()))?;
        }
        Ok(qrels)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumInfo {
    pub pool_size: u64,
    pub sampled_size: u64,
    /// Pooled item ids; `None` when no membership file was given.
    pub membership: Option<HashSet<String>>,
}

impl StratumInfo {
    pub fn sampling_rate(&self) -> f64 {
        self.sampled_size as f64 / self.pool_size as f64
    }
}

/// Pool and sample sizes (and optional membership) per (query, stratum).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrataSpec {
    strata: BTreeMap<(String, String), StratumInfo>,
}

impl StrataSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: &str, stratum: &str, pool_size: u64, sampled_size: u64) {
        self.strata.insert(
            (query.to_string(), stratum.to_string()),
            StratumInfo { pool_size, sampled_size, membership: None },
        );
    }

    pub fn add_member(&mut self, query: &str, stratum: &str, item: &str) -> bool {
        match self.strata.get_mut(&(query.to_string(), stratum.to_string())) {
            Some(info) => {
                info.membership.get_or_insert_with(HashSet::new).insert(item.to_string());
                true
            }
            None => false,
        }
    }

    pub fn get(&self, query: &str, stratum: &str) -> Option<&StratumInfo> {
        self.strata.get(&(query.to_string(), stratum.to_string()))
    }

    fn for_query<'a>(&'a self, query: &'a str) -> impl Iterator<Item = (&'a str, &'a StratumInfo)> + 'a {
        self.strata
            .range((query.to_string(), String::new())..)
            .take_while(move |((q, _), _)| q == query)
            .map(|((_, s), info)| (s.as_str(), info))
    }

    /// Parses `query_id stratum_id pool_size sampled_size` lines.
    pub fn read<R: BufRead>(reader: R) -> Result<StrataSpec, EvalError> {
        let mut spec = StrataSpec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: &str| EvalError::Format { line: line_no, message: m.to_string() };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(err("expected 4 columns: query_id stratum_id pool_size sampled_size"));
            }
            let pool: u64 = cols[2].parse().map_err(|_| err("bad pool_size"))?;
            let sampled: u64 = cols[3].parse().map_err(|_| err("bad sampled_size"))?;
            if pool == 0 || sampled == 0 || sampled > pool {
                return Err(err("need pool_size >= sampled_size >= 1"));
            }
            if spec.get(cols[0], cols[1]).is_some() {
                return Err(err("stratum declared twice"));
            }
            spec.insert(cols[0], cols[1], pool, sampled);
        }
        Ok(spec)
    }

    /// Adds `query_id stratum_id item_id` membership lines.
    pub fn read_membership<R: BufRead>(&mut self, reader: R) -> Result<(), EvalError> {
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: &str| EvalError::Format { line: line_no, message: m.to_string() };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 3 {
                return Err(err("expected 3 columns: query_id stratum_id item_id"));
            }
            if !self.add_member(cols[0], cols[1], cols[2]) {
                return Err(err("membership for an undeclared stratum"));
            }
        }
        Ok(())
    }
}

/// Validated per-query view used by the inferred-AP estimator.
#[derive(Debug, Clone)]
pub struct PreparedStrata {
    rates: Vec<f64>,
    /// Pooled item -> (stratum index, judgment if sampled).
    pooled: HashMap<String, (usize, Option<Judgment>)>,
    estimated_relevant: f64,
}

impl PreparedStrata {
    /// With `strata = None`, every stratum named in the qrels is treated as
    /// fully judged (rate 1, pool = its judged items).
    pub fn new(query: &str, qrels: &QueryQrels, strata: Option<&StrataSpec>) -> Result<Self, EvalError> {
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut rates = Vec::new();
        let mut pooled: HashMap<String, (usize, Option<Judgment>)> = HashMap::new();

        match strata {
            None => {
                let mut names: Vec<&str> = qrels.items.values().map(|j| j.stratum.as_str()).collect();
                names.sort_unstable();
                names.dedup();
                for name in names {
                    index.insert(name.to_string(), rates.len());
                    rates.push(1.0);
                }
                for (item, j) in &qrels.items {
                    pooled.insert(item.clone(), (index[&j.stratum], Some(j.judgment)));
                }
            }
            Some(spec) => {
                let mut owner: HashMap<&str, &str> = HashMap::new();
                let mut judged_per_stratum: HashMap<&str, u64> = HashMap::new();
                for j in qrels.items.values() {
                    *judged_per_stratum.entry(j.stratum.as_str()).or_default() += 1;
                }
                for (name, info) in spec.for_query(query) {
                    let bad = |message: String| EvalError::BadStratum {
                        query: query.into(),
                        stratum: name.into(),
                        message,
                    };
                    if info.pool_size == 0 || info.sampled_size == 0 || info.sampled_size > info.pool_size {
                        return Err(bad("need pool_size >= sampled_size >= 1".into()));
                    }
                    let judged = judged_per_stratum.get(name).copied().unwrap_or(0);
                    if judged > info.sampled_size {
                        return Err(bad(format!("{judged} judged items but sampled_size {}", info.sampled_size)));
                    }
                    let s = rates.len();
                    index.insert(name.to_string(), s);
                    rates.push(info.sampling_rate());
                    match &info.membership {
                        Some(members) => {
                            if members.len() as u64 != info.pool_size {
                                return Err(bad(format!(
                                    "membership lists {} items but pool_size is {}",
                                    members.len(),
                                    info.pool_size
                                )));
                            }
                            for m in members {
                                if let Some(prev) = owner.insert(m.as_str(), name) {
                                    return Err(EvalError::OverlappingStrata {
                                        query: query.into(),
                                        item: m.clone(),
                                        first: prev.into(),
                                        second: name.into(),
                                    });
                                }
                                pooled.insert(m.clone(), (s, None));
                            }
                        }
                        None if info.sampled_size == info.pool_size => {}
                        None => {
                            return Err(bad("sampled stratum needs a membership list".into()));
                        }
                    }
                }
                for (item, j) in &qrels.items {
                    let Some(&s) = index.get(&j.stratum) else {
                        return Err(EvalError::UndeclaredStratum { query: query.into(), stratum: j.stratum.clone() });
                    };
                    let info = spec.get(query, &j.stratum).expect("indexed strata exist");
                    match pooled.get_mut(item) {
                        Some(entry) if entry.0 == s => entry.1 = Some(j.judgment),
                        Some(_) => {
                            return Err(EvalError::StratumViolation {
                                query: query.into(),
                                stratum: j.stratum.clone(),
                                item: item.clone(),
                            })
                        }
                        None if info.membership.is_none() => {
                            pooled.insert(item.clone(), (s, Some(j.judgment)));
                        }
                        None => {
                            return Err(EvalError::StratumViolation {
                                query: query.into(),
                                stratum: j.stratum.clone(),
                                item: item.clone(),
                            })
                        }
                    }
                }
            }
        }

        let mut estimated_relevant = 0.0;
        for j in qrels.items.values() {
            if j.judgment == Judgment::Relevant {
                estimated_relevant += 1.0 / rates[index[&j.stratum]];
            }
        }
        Ok(PreparedStrata { rates, pooled, estimated_relevant })
    }

    pub fn estimated_relevant(&self) -> f64 {
        self.estimated_relevant
    }
}

/// Per-query outcome with the reason it was forced to 0, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub flag: Option<EvalFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalFlag {
    /// The query has no (estimated) relevant items.
    NoRelevant,
    /// No run was submitted for a judged query.
    MissingRun,
}

/// Non-interpolated AP over the first `depth` ranks, normalized by the total
/// number of judged-relevant items.
pub fn average_precision(run: &RunList, qrels: &QueryQrels, depth: usize) -> Score {
    let total = qrels.relevant_count();
    if total == 0 {
        return Score { value: 0.0, flag: Some(EvalFlag::NoRelevant) };
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, e) in run.entries.iter().take(depth).enumerate() {
        if qrels.judgment(&e.item_id) == Some(Judgment::Relevant) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Score { value: sum / total as f64, flag: None }
}

/// Inferred AP of one run under stratified sampled judgments.
pub fn inf_ap(run: &RunList, strata: &PreparedStrata, depth: usize, epsilon: f64) -> Score {
    if strata.estimated_relevant <= 0.0 {
        return Score { value: 0.0, flag: Some(EvalFlag::NoRelevant) };
    }
    let n_strata = strata.rates.len();
    let mut pooled_above = vec![0u64; n_strata];
    let mut rel_above = vec![0u64; n_strata];
    let mut nonrel_above = vec![0u64; n_strata];
    let mut sum = 0.0;

    for (i, e) in run.entries.iter().take(depth).enumerate() {
        let k = (i + 1) as f64;
        let info = strata.pooled.get(&e.item_id).copied();
        if let Some((s, Some(Judgment::Relevant))) = info {
            let expected_precision = if i == 0 {
                1.0
            } else {
                let above = k - 1.0;
                let mut inner = 0.0;
                for t in 0..n_strata {
                    if pooled_above[t] == 0 {
                        continue;
                    }
                    let (rel, nonrel) = (rel_above[t] as f64, nonrel_above[t] as f64);
                    inner += (pooled_above[t] as f64 / above) * ((rel + epsilon) / (rel + nonrel + 2.0 * epsilon));
                }
                1.0 / k + (above / k) * inner
            };
            sum += expected_precision / strata.rates[s];
        }
        if let Some((s, judgment)) = info {
            pooled_above[s] += 1;
            match judgment {
                Some(Judgment::Relevant) => rel_above[s] += 1,
                Some(Judgment::NonRelevant) => nonrel_above[s] += 1,
                None => {}
            }
        }
    }
    Score { value: sum / strata.estimated_relevant, flag: None }
}

/// Rank (1-based, within `depth`) of the first relevant item.
pub fn first_relevant_rank(run: &RunList, qrels: &QueryQrels, depth: usize) -> Option<usize> {
    run.entries
        .iter()
        .take(depth)
        .position(|e| qrels.judgment(&e.item_id) == Some(Judgment::Relevant))
        .map(|p| p + 1)
}

/// Lower median (the `(n-1)/2`-th order statistic); `None` for no values.
pub fn lower_median(values: &[usize]) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    Some(v[(v.len() - 1) / 2])
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub query_id: String,
    pub ap: Score,
    pub inf_ap: Score,
    /// Sentinel `depth + 1` when nothing relevant was retrieved.
    pub first_relevant_rank: usize,
    /// A relevant item appeared within the depth.
    pub retrieved: bool,
    pub missing_run: bool,
}

impl QueryMetrics {
    pub fn recall_at(&self, k: usize) -> f64 {
        if self.retrieved && self.first_relevant_rank <= k {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub depth: usize,
    pub per_query: Vec<QueryMetrics>,
    pub map: f64,
    pub xinf_ap: f64,
    pub med_r: usize,
    pub recall: Vec<(usize, f64)>,
}

/// Evaluates runs against every query in `qrels` at the given depth.
pub fn evaluate(
    runs: &[RunList],
    qrels: &Qrels,
    strata: Option<&StrataSpec>,
    depth: usize,
    epsilon: f64,
) -> Result<MetricReport, EvalError> {
    let by_query: HashMap<&str, &RunList> = runs.iter().rev().map(|r| (r.query_id.as_str(), r)).collect();
    let empty = RunList { query_id: String::new(), entries: Vec::new() };
    let queries: Vec<(&str, &QueryQrels)> = qrels.queries.iter().map(|(k, v)| (k.as_str(), v)).collect();

    let one = |(qid, qq): &(&str, &QueryQrels)| -> Result<QueryMetrics, EvalError> {
        let prepared = PreparedStrata::new(qid, qq, strata)?;
        let (run, missing_run) = match by_query.get(qid) {
            Some(r) => (*r, false),
            None => (&empty, true),
        };
        let mut ap = average_precision(run, qq, depth);
        let mut inf = inf_ap(run, &prepared, depth, epsilon);
        if missing_run {
            ap = Score { value: 0.0, flag: Some(EvalFlag::MissingRun) };
            inf = Score { value: 0.0, flag: Some(EvalFlag::MissingRun) };
        }
        let first = first_relevant_rank(run, qq, depth);
        Ok(QueryMetrics {
            query_id: qid.to_string(),
            ap,
            inf_ap: inf,
            first_relevant_rank: first.unwrap_or(depth + 1),
            retrieved: first.is_some(),
            missing_run,
        })
    };
    #[cfg(feature = "parallel")]
    let per_query: Vec<QueryMetrics> = queries.par_iter().map(one).collect::<Result<_, _>>()?;
    #[cfg(not(feature = "parallel"))]
    let per_query: Vec<QueryMetrics> = queries.iter().map(one).collect::<Result<_, _>>()?;

    let n = per_query.len();
    let mean = |f: &dyn Fn(&QueryMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_query.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let ranks: Vec<usize> = per_query.iter().map(|q| q.first_relevant_rank).collect();
    Ok(MetricReport {
        depth,
        map: mean(&|q| q.ap.value),
        xinf_ap: mean(&|q| q.inf_ap.value),
        med_r: lower_median(&ranks).unwrap_or(depth + 1),
        recall: RECALL_CUTOFFS.iter().map(|&k| (k, mean(&|q| q.recall_at(k)))).collect(),
        per_query,
    })
}

/// Mean inferred AP over all judged queries; a query without a run scores 0.
pub fn xinf_ap(runs: &[RunList], qrels: &Qrels, strata: Option<&StrataSpec>, depth: usize) -> Result<f64, EvalError> {
    Ok(evaluate(runs, qrels, strata, depth, DEFAULT_EPSILON)?.xinf_ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    XinfAp,
    Map,
    Recall,
    MedR,
}

impl Metric {
    pub fn parse_list(text: &str) -> Result<Vec<Metric>, String> {
        text.split(',')
            .map(|m| match m.trim() {
                "xinfap" => Ok(Metric::XinfAp),
                "map" => Ok(Metric::Map),
                "recall" => Ok(Metric::Recall),
                "medr" => Ok(Metric::MedR),
                other => Err(format!("unknown metric {other:?} (expected xinfap, map, recall, medr)")),
            })
            .collect()
    }
}

impl MetricReport {
    /// `metric<TAB>query<TAB>value` lines; aggregate rows use the query id `all`.
    pub fn render(&self, metrics: &[Metric], per_query: bool) -> String {
        let mut out = String::new();
        if per_query {
            for q in &self.per_query {
                for m in metrics {
                    match m {
                        Metric::XinfAp => {
                            let _ = writeln!(out, "infAP\t{}\t{:.4}", q.query_id, q.inf_ap.value);
                        }
                        Metric::Map => {
                            let _ = writeln!(out, "AP\t{}\t{:.4}", q.query_id, q.ap.value);
                        }
                        Metric::Recall => {
                            for k in RECALL_CUTOFFS {
                                let _ = writeln!(out, "R@{k}\t{}\t{:.4}", q.query_id, q.recall_at(k));
                            }
                        }
                        Metric::MedR => {
                            let _ = writeln!(out, "rank\t{}\t{}", q.query_id, q.first_relevant_rank);
                        }
                    }
                }
            }
        }
        let _ = writeln!(out, "num_q\tall\t{}", self.per_query.len());
        let _ = writeln!(out, "depth\tall\t{}", self.depth);
        for m in metrics {
            match m {
                Metric::XinfAp => {
                    let _ = writeln!(out, "xinfAP\tall\t{:.4}", self.xinf_ap);
                }
                Metric::Map => {
                    let _ = writeln!(out, "mAP\tall\t{:.4}", self.map);
                }
                Metric::Recall => {
                    for (k, v) in &self.recall {
                        let _ = writeln!(out, "R@{k}\tall\t{v:.4}");
                    }
                }
                Metric::MedR => {
                    let _ = writeln!(out, "MedR\tall\t{}", self.med_r);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RunEntry;

    fn run(qid: &str, items: &[&str]) -> RunList {
        RunList {
            query_id: qid.to_string(),
            entries: items
                .iter()
                .enumerate()
                .map(|(i, id)| RunEntry { item_id: id.to_string(), score: 1.0 / (i + 1) as f64, rank: i + 1 })
                .collect(),
        }
    }

    fn qrels(lines: &str) -> Qrels {
        Qrels::read(lines.as_bytes()).unwrap()
    }

    #[test]
    fn ap_examples() {
        let q = qrels("q s d1 1\nq s d2 0\nq s d3 1\n");
        let qq = q.query("q").unwrap();
        let ap = average_precision(&run("q", &["d1", "d2", "d3"]), qq, 3);
        assert!((ap.value - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        let single = qrels("q s d1 1\n");
        assert_eq!(average_precision(&run("q", &["d1", "x"]), single.query("q").unwrap(), 10).value, 1.0);
        assert_eq!(average_precision(&run("q", &["x", "y", "d1"]), single.query("q").unwrap(), 2).value, 0.0);
        let none = qrels("q s d1 0\n");
        assert_eq!(average_precision(&run("q", &["d1"]), none.query("q").unwrap(), 2).flag, Some(EvalFlag::NoRelevant));
    }

    #[test]
    fn inf_ap_rank_one() {
        let q = qrels("q s d1 1\nq s d2 0\n");
        let qq = q.query("q").unwrap();
        let prepared = PreparedStrata::new("q", qq, None).unwrap();
        assert_eq!(prepared.estimated_relevant(), 1.0);
        let v = inf_ap(&run("q", &["d1", "d2"]), &prepared, 1000, DEFAULT_EPSILON);
        assert!((v.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inf_ap_matches_ap_under_full_judgments() {
        let q = qrels("q s a 1\nq s b 0\nq s c 1\nq s d 0\nq s e 1\n");
        let qq = q.query("q").unwrap();
        let prepared = PreparedStrata::new("q", qq, None).unwrap();
        for order in [["a", "b", "c", "d", "e"], ["b", "d", "a", "e", "c"], ["e", "d", "c", "b", "a"]] {
            let r = run("q", &order);
            let ap = average_precision(&r, qq, 1000).value;
            let inf = inf_ap(&r, &prepared, 1000, DEFAULT_EPSILON).value;
            assert!((ap - inf).abs() <= 10.0 * DEFAULT_EPSILON, "{ap} vs {inf}");
        }
    }

    /// Two strata: "hi" fully judged (rate 1), "lo" half sampled (rate 0.5).
    fn two_strata() -> (Qrels, StrataSpec) {
        let q = qrels("q hi a 1\nq hi b 0\nq lo c 1\nq lo e 0\n");
        let mut s = StrataSpec::read("q hi 2 2\nq lo 4 2\n".as_bytes()).unwrap();
        s.read_membership("q hi a\nq hi b\nq lo c\nq lo d\nq lo e\nq lo f\n".as_bytes()).unwrap();
        (q, s)
    }

    #[test]
    fn two_strata_hand_example() {
        let (q, s) = two_strata();
        let qq = q.query("q").unwrap();
        let prepared = PreparedStrata::new("q", qq, Some(&s)).unwrap();
        // R_hat = 1/1 + 1/0.5
        assert_eq!(prepared.estimated_relevant(), 3.0);
        let eps = DEFAULT_EPSILON;
        // ranking: a b d c x   (x unpooled)
        let r = run("q", &["a", "b", "d", "c", "x"]);
        // rank 1 (a, hi): 1
        // rank 4 (c, lo): above = {a: hi rel, b: hi nonrel, d: lo unjudged}
        let hi = (2.0 / 3.0) * ((1.0 + eps) / (2.0 + 2.0 * eps));
        let lo = (1.0 / 3.0) * (eps / (2.0 * eps));
        let p4 = 0.25 + 0.75 * (hi + lo);
        let expected = (1.0 / 1.0 + p4 / 0.5) / 3.0;
        let got = inf_ap(&r, &prepared, 1000, eps).value;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        // depth 3 drops the lo-stratum hit
        let got = inf_ap(&r, &prepared, 3, eps).value;
        assert!((got - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn strata_validation() {
        let (q, mut s) = two_strata();
        let qq = q.query("q").unwrap();
        // judged item outside its stratum
        let bad = qrels("q hi z 1\n");
        assert!(matches!(PreparedStrata::new("q", bad.query("q").unwrap(), Some(&s)), Err(EvalError::StratumViolation { .. })));
        // undeclared stratum
        let bad = qrels("q mid a 1\n");
        assert!(matches!(PreparedStrata::new("q", bad.query("q").unwrap(), Some(&s)), Err(EvalError::UndeclaredStratum { .. })));
        // overlapping membership
        s.add_member("q", "lo", "a");
        assert!(PreparedStrata::new("q", qq, Some(&s)).is_err());
        // sampled stratum without membership
        let s2 = StrataSpec::read("q hi 2 2\nq lo 4 2\n".as_bytes()).unwrap();
        assert!(matches!(PreparedStrata::new("q", qq, Some(&s2)), Err(EvalError::BadStratum { .. })));
        // rate-1 strata need no membership
        let s3 = StrataSpec::read("q hi 2 2\nq lo 2 2\n".as_bytes()).unwrap();
        assert!(PreparedStrata::new("q", qq, Some(&s3)).is_ok());

        assert!(StrataSpec::read("q hi 2 3\n".as_bytes()).is_err());
        assert!(StrataSpec::read("q hi 0 0\n".as_bytes()).is_err());
        assert!(StrataSpec::new().read_membership("q hi a\n".as_bytes()).is_err());
    }

    #[test]
    fn qrels_format_errors() {
        assert!(Qrels::read("q s d 2\n".as_bytes()).is_err());
        assert!(Qrels::read("q s d\n".as_bytes()).is_err());
        assert!(matches!(Qrels::read("q s d 1\nq t d 0\n".as_bytes()), Err(EvalError::Format { line: 2, .. })));
    }

    #[test]
    fn recall_and_median() {
        // first relevant ranks 1, 7, 20
        let q = qrels("q1 s a 1\nq2 s g 1\nq3 s t 1\n");
        let letters: Vec<String> = (b'a'..=b'z').map(|c| (c as char).to_string()).collect();
        let items: Vec<&str> = letters.iter().map(String::as_str).collect();
        let runs = vec![run("q1", &items), run("q2", &items), run("q3", &items)];
        let report = evaluate(&runs, &q, None, 1000, DEFAULT_EPSILON).unwrap();
        let ranks: Vec<_> = report.per_query.iter().map(|m| m.first_relevant_rank).collect();
        assert_eq!(ranks, vec![1, 7, 20]);
        assert_eq!(report.recall, vec![(1, 1.0 / 3.0), (5, 1.0 / 3.0), (10, 2.0 / 3.0)]);
        assert_eq!(report.med_r, 7);

        assert_eq!(lower_median(&[4, 1, 3, 2]), Some(2));
        assert_eq!(lower_median(&[]), None);

        // not retrieved within depth -> sentinel
        let report = evaluate(&runs, &q, None, 10, DEFAULT_EPSILON).unwrap();
        assert_eq!(report.per_query[2].first_relevant_rank, 11);
        assert_eq!(report.per_query[2].recall_at(20), 0.0);
    }

    #[test]
    fn means_and_missing_runs() {
        let q = qrels("q1 s a 1\nq1 s b 0\nq2 s a 0\nq2 s b 1\n");
        let runs = vec![run("q1", &["a", "b"]), run("q2", &["a", "c", "d", "e", "b"])];
        let report = evaluate(&runs, &q, None, 1000, DEFAULT_EPSILON).unwrap();
        let per: Vec<_> = report.per_query.iter().map(|m| m.inf_ap.value).collect();
        assert!((report.xinf_ap - (per[0] + per[1]) / 2.0).abs() < 1e-15);
        assert!((report.map - (1.0 + 0.2) / 2.0).abs() < 1e-12);

        let report = evaluate(&runs[..1], &q, None, 1000, DEFAULT_EPSILON).unwrap();
        assert!(report.per_query[1].missing_run);
        assert_eq!(report.per_query[1].inf_ap.flag, Some(EvalFlag::MissingRun));
        assert!((report.xinf_ap - 0.5).abs() < 1e-4);

        let text = report.render(&[Metric::XinfAp, Metric::Map, Metric::Recall, Metric::MedR], false);
        assert!(text.contains("xinfAP\tall\t0.5000"));
        assert!(text.contains("MedR\tall\t1"));
        assert!(Metric::parse_list("map,bogus").is_err());
    }
}
