//! TREC-style effectiveness metrics and qrels I/O.
//!
//! Queries are evaluated over the qrels' query set: a judged query that is
//! absent from the run scores 0, and run queries without judgments are
//! ignored.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::run::{RankedRun, ScoredDoc};
use crate::text::Lines;

/// Graded judgments: query → document → relevance.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Qrels {
    judgments: BTreeMap<String, HashMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, relevance: u32) {
        self.judgments
            .entry(query_id.to_owned())
            .or_default()
            .insert(doc_id.to_owned(), relevance);
    }

    pub fn get(&self, query_id: &str) -> Option<&HashMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn relevance(&self, query_id: &str, doc_id: &str) -> u32 {
        self.get(query_id)
            .and_then(|j| j.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn num_queries(&self) -> usize {
        self.judgments.len()
    }
}

/// Parses `query_id 0 doc_id relevance` lines.
pub fn parse_qrels(content: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (offset, line) in Lines::new(content) {
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        let [qid, _iter, doc_id, rel] = fields[..] else {
            return Err(Error::format(
                offset,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        };
        let rel: u32 = rel
            .parse()
            .map_err(|_| Error::format(offset, format!("bad relevance {rel:?}")))?;
        qrels.insert(qid, doc_id, rel);
    }
    Ok(qrels)
}

pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    parse_qrels(&fs::read_to_string(path)?)
}

type Judgments = HashMap<String, u32>;

fn rel_of(judged: &Judgments, doc: &ScoredDoc) -> u32 {
    judged.get(&doc.doc_id).copied().unwrap_or(0)
}

fn gain(rel: u32) -> f64 {
    2f64.powi(rel as i32) - 1.0
}

fn discount(position: usize) -> f64 {
    (position as f64 + 2.0).log2()
}

/// nDCG with exponential gain `2^rel − 1` and `log2(rank + 1)` discount.
pub fn ndcg_at_k(ranking: &[ScoredDoc], judged: &Judgments, k: usize) -> f64 {
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&r| r > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| gain(r) / discount(i))
        .sum();
    if idcg == 0.0 {
        return 0.0;
    }
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| gain(rel_of(judged, d)) / discount(i))
        .sum();
    dcg / idcg
}

fn num_relevant(judged: &Judgments, min_rel: u32) -> usize {
    judged.values().filter(|&&r| r >= min_rel).count()
}

/// Average precision over the top `k`, normalized by all relevant documents.
pub fn ap_at_k(ranking: &[ScoredDoc], judged: &Judgments, k: usize, min_rel: u32) -> f64 {
    let total = num_relevant(judged, min_rel);
    if total == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranking.iter().take(k).enumerate() {
        if rel_of(judged, d) >= min_rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total as f64
}

pub fn rr_at_k(ranking: &[ScoredDoc], judged: &Judgments, k: usize, min_rel: u32) -> f64 {
    ranking
        .iter()
        .take(k)
        .position(|d| rel_of(judged, d) >= min_rel)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

pub fn recall_at_k(ranking: &[ScoredDoc], judged: &Judgments, k: usize, min_rel: u32) -> f64 {
    let total = num_relevant(judged, min_rel);
    if total == 0 {
        return 0.0;
    }
    let hits = ranking
        .iter()
        .take(k)
        .filter(|d| rel_of(judged, d) >= min_rel)
        .count();
    hits as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ndcg(usize),
    Ap(usize),
    Rr(usize),
    Recall(usize),
}

impl Metric {
    pub const DEFAULT_SET: [Metric; 4] = [
        Metric::Ndcg(10),
        Metric::Ap(1000),
        Metric::Rr(10),
        Metric::Recall(1000),
    ];

    pub fn compute(&self, ranking: &[ScoredDoc], judged: &Judgments, min_rel: u32) -> f64 {
        match *self {
            Metric::Ndcg(k) => ndcg_at_k(ranking, judged, k),
            Metric::Ap(k) => ap_at_k(ranking, judged, k, min_rel),
            Metric::Rr(k) => rr_at_k(ranking, judged, k, min_rel),
            Metric::Recall(k) => recall_at_k(ranking, judged, k, min_rel),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        let (kind, k) = name.split_once('@').ok_or_else(|| {
            Error::domain(format!("metric {name:?} needs a cut-off, e.g. nDCG@10"))
        })?;
        let k: usize = k
            .parse()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| Error::domain(format!("bad cut-off in {name:?}")))?;
        match kind.to_ascii_lowercase().as_str() {
            "ndcg" => Ok(Metric::Ndcg(k)),
            "ap" | "map" => Ok(Metric::Ap(k)),
            "rr" | "mrr" => Ok(Metric::Rr(k)),
            "r" | "recall" => Ok(Metric::Recall(k)),
            _ => Err(Error::domain(format!("unknown metric {name:?}"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Ndcg(k) => write!(f, "nDCG@{k}"),
            Metric::Ap(k) => write!(f, "AP@{k}"),
            Metric::Rr(k) => write!(f, "RR@{k}"),
            Metric::Recall(k) => write!(f, "R@{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: Metric,
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metrics: Vec<MetricSummary>,
    pub query_count: usize,
}

impl MetricReport {
    pub fn get(&self, metric: Metric) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == metric)
    }

    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.get(metric).map(|m| m.mean)
    }

    /// Aligned table of per-metric means.
    pub fn to_table(&self) -> String {
        let width = self
            .metrics
            .iter()
            .map(|m| m.metric.to_string().len())
            .max()
            .unwrap_or(6)
            .max(6);
        let mut out = format!("{:<width$}  {:>8}\n", "metric", "mean");
        for m in &self.metrics {
            let _ = writeln!(out, "{:<width$}  {:>8.4}", m.metric.to_string(), m.mean);
        }
        let _ = writeln!(out, "{:<width$}  {:>8}", "queries", self.query_count);
        out
    }

    /// One `metric<TAB>query_id<TAB>value` line per query, then the mean
    /// under the query ID `all`.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for m in &self.metrics {
            for (q, v) in &m.per_query {
                let _ = writeln!(out, "{}\t{q}\t{v}", m.metric);
            }
            let _ = writeln!(out, "{}\tall\t{}", m.metric, m.mean);
        }
        out
    }
}

/// Scores `run` against `qrels`. Binary metrics count grades `>= min_rel`
/// as relevant.
pub fn evaluate(run: &RankedRun, qrels: &Qrels, metrics: &[Metric], min_rel: u32) -> MetricReport {
    let summaries = metrics
        .iter()
        .map(|&metric| {
            let per_query: BTreeMap<String, f64> = qrels
                .judgments
                .iter()
                .map(|(qid, judged)| {
                    let ranking = run.get(qid).unwrap_or(&[]);
                    (qid.clone(), metric.compute(ranking, judged, min_rel))
                })
                .collect();
            let mean = if per_query.is_empty() {
                0.0
            } else {
                per_query.values().sum::<f64>() / per_query.len() as f64
            };
            MetricSummary {
                metric,
                per_query,
                mean,
            }
        })
        .collect();
    MetricReport {
        metrics: summaries,
        query_count: qrels.num_queries(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(ids: &[&str]) -> Vec<ScoredDoc> {
        ids.iter()
            .enumerate()
            .map(|(i, d)| ScoredDoc::new(*d, -(i as f64)))
            .collect()
    }

    fn judged(pairs: &[(&str, u32)]) -> Judgments {
        pairs.iter().map(|(d, r)| (d.to_string(), *r)).collect()
    }

    #[test]
    fn ndcg_examples() {
        let r = ranking(&["a", "b", "c"]);
        assert_eq!(ndcg_at_k(&r, &judged(&[("a", 1)]), 10), 1.0);
        assert_eq!(ndcg_at_k(&r, &judged(&[]), 10), 0.0);
        assert_eq!(ndcg_at_k(&r, &judged(&[("a", 0)]), 10), 0.0);
        // grades 1 at rank 2 and 2 at rank 3:
        // DCG = 1/log2(3) + 3/log2(4) = 0.63093 + 1.5
        // IDCG = 3/log2(2) + 1/log2(3) = 3 + 0.63093
        let got = ndcg_at_k(&r, &judged(&[("b", 1), ("c", 2)]), 3);
        let want = (1.0 / 3f64.log2() + 1.5) / (3.0 + 1.0 / 3f64.log2());
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.586_882_671).abs() < 1e-6);
    }

    #[test]
    fn binary_metric_examples() {
        let r = ranking(&["x", "y", "rel", "z"]);
        let j = judged(&[("rel", 1)]);
        assert!((rr_at_k(&r, &j, 10, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rr_at_k(&r, &j, 2, 1), 0.0);

        let j = judged(&[("x", 2), ("z", 1), ("nope", 0)]);
        assert_eq!(recall_at_k(&r, &j, 4, 1), 1.0);
        assert_eq!(recall_at_k(&r, &j, 2, 1), 0.5);
        assert_eq!(recall_at_k(&r, &j, 4, 2), 1.0);

        // relevant at ranks 1 and 4: (1/1 + 2/4) / 2
        assert_eq!(ap_at_k(&r, &j, 5, 1), 0.75);
        assert_eq!(ap_at_k(&r, &judged(&[]), 5, 1), 0.0);
    }

    #[test]
    fn qrels_parsing() {
        let q = parse_qrels("q1 0 d1 1\nq1 0 d2 0\nq2 0 d3 2\n").unwrap();
        assert_eq!(q.num_queries(), 2);
        assert_eq!(q.relevance("q2", "d3"), 2);
        assert_eq!(q.relevance("q2", "d9"), 0);
        assert!(parse_qrels("q1 0 d1\n").is_err());
        assert!(parse_qrels("q1 0 d1 -1\n").is_err());
    }

    #[test]
    fn evaluate_uses_qrels_queries() {
        let mut run = RankedRun::new("t");
        run.insert("q1", ranking(&["a", "b"])).unwrap();
        run.insert("unjudged", ranking(&["a"])).unwrap();
        let qrels = parse_qrels("q1 0 b 1\nq2 0 c 1\n").unwrap();
        let report = evaluate(&run, &qrels, &[Metric::Rr(10)], 1);
        let rr = report.get(Metric::Rr(10)).unwrap();
        assert_eq!(rr.per_query.len(), 2);
        assert_eq!(rr.per_query["q1"], 0.5);
        assert_eq!(rr.per_query["q2"], 0.0);
        assert_eq!(rr.mean, 0.25);
        assert!(report.to_records().contains("RR@10\tall\t0.25\n"));
        assert!(report.to_table().contains("RR@10"));
    }

    #[test]
    fn metric_names() {
        for m in Metric::DEFAULT_SET {
            assert_eq!(Metric::parse(&m.to_string()).unwrap(), m);
        }
        assert!(Metric::parse("ndcg").is_err());
        assert!(Metric::parse("foo@3").is_err());
        assert!(Metric::parse("ndcg@0").is_err());
    }
}
