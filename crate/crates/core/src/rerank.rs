//! Interpolation-based re-ranking.
//!
//! A sparse (lexical) ranking is re-scored as `α·φ_S + (1−α)·φ_D`, where the
//! dense score `φ_D` comes from a forward-index lookup. The early-stopping
//! variant walks the sparse ranking in order with a size-`k` priority queue
//! and stops as soon as the best score any remaining document could reach,
//! `α·φ_S(d) + (1−α)·s_D`, cannot beat the current `k`-th best.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::ForwardIndex;
use crate::run::{RankedRun, ScoredDoc};
use crate::vector::DenseVector;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_TAG: &str = "fast-forward";

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

#[inline]
fn mix(alpha: f64, sparse: f64, dense: f64) -> f64 {
    alpha * sparse + (1.0 - alpha) * dense
}

/// `α·sparse + (1−α)·dense`.
pub fn interpolate(sparse: f64, dense: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(mix(alpha, sparse, dense))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Exhaustive,
    /// Bound the dense score by the largest one observed so far.
    EarlyStopRunningMax,
    /// Bound the dense score by a caller-supplied upper limit.
    EarlyStopWithBound(f64),
}

/// What to do when a sparse candidate has no forward-index entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    Abort,
    /// Keep the document with only its weighted sparse score `α·φ_S`.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationConfig {
    alpha: f64,
    k_s: usize,
    k: usize,
    mode: Mode,
    on_missing: MissingPolicy,
}

impl InterpolationConfig {
    pub fn new(alpha: f64, k_s: usize, k: usize, mode: Mode) -> Result<Self> {
        check_alpha(alpha)?;
        if k == 0 || k > k_s {
            return Err(Error::domain(format!(
                "need 1 <= k <= k_s, got k={k}, k_s={k_s}"
            )));
        }
        if let Mode::EarlyStopWithBound(b) = mode {
            if b.is_nan() {
                return Err(Error::domain("dense score bound is NaN"));
            }
        }
        Ok(Self {
            alpha,
            k_s,
            k,
            mode,
            on_missing: MissingPolicy::Abort,
        })
    }

    pub fn with_missing_policy(mut self, policy: MissingPolicy) -> Self {
        self.on_missing = policy;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k_s(&self) -> usize {
        self.k_s
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn missing_policy(&self) -> MissingPolicy {
        self.on_missing
    }
}

/// Work counters, summed over queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RerankStats {
    pub queries: usize,
    /// Dense score computations (forward-index lookups) attempted.
    pub lookups: usize,
    /// Queries whose scan ended before exhausting the sparse candidates.
    pub early_stops: usize,
    /// Candidates absent from the index (skip policy only).
    pub missing: usize,
}

impl RerankStats {
    pub fn merge(self, other: Self) -> Self {
        Self {
            queries: self.queries + other.queries,
            lookups: self.lookups + other.lookups,
            early_stops: self.early_stops + other.early_stops,
            missing: self.missing + other.missing,
        }
    }

    pub fn mean_lookups(&self) -> f64 {
        if self.queries == 0 {
            0.0
        } else {
            self.lookups as f64 / self.queries as f64
        }
    }
}

/// Source of dense scores `φ_D(q, d)` for one query.
pub trait DenseScorer {
    fn dense_score(&self, doc_id: &str) -> Result<f64>;
}

/// maxP scores of one query against a forward index.
pub struct IndexScorer<'a> {
    index: &'a ForwardIndex,
    query: &'a [f32],
}

impl<'a> IndexScorer<'a> {
    pub fn new(index: &'a ForwardIndex, query: &'a [f32]) -> Result<Self> {
        if query.len() != index.dim() {
            return Err(Error::Dimension {
                expected: index.dim(),
                actual: query.len(),
            });
        }
        Ok(Self { index, query })
    }
}

impl DenseScorer for IndexScorer<'_> {
    fn dense_score(&self, doc_id: &str) -> Result<f64> {
        self.index.score_maxp(self.query, doc_id)
    }
}

impl DenseScorer for HashMap<String, f64> {
    fn dense_score(&self, doc_id: &str) -> Result<f64> {
        self.get(doc_id)
            .copied()
            .ok_or_else(|| Error::MissingDocument(doc_id.to_owned()))
    }
}

/// Interpolated score of the candidate at position `rank` of the sparse list.
///
/// Ordered by goodness: higher score first, then better sparse rank. Sparse
/// ranks are unique within a query, so the order is total and no doc-id
/// comparison is ever needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub(crate) score: f64,
    pub(crate) rank: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // + 0.0 folds -0.0 into 0.0 so that equal scores tie
        (self.score + 0.0)
            .total_cmp(&(other.score + 0.0))
            .then_with(|| other.rank.cmp(&self.rank))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dense_or_skip<S: DenseScorer + ?Sized>(
    scorer: &S,
    doc_id: &str,
    policy: MissingPolicy,
    stats: &mut RerankStats,
) -> Result<Option<f64>> {
    stats.lookups += 1;
    match scorer.dense_score(doc_id) {
        Ok(s) => Ok(Some(s)),
        Err(Error::MissingDocument(_)) if policy == MissingPolicy::Skip => {
            stats.missing += 1;
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Scores every candidate within depth `k_s`.
pub(crate) fn score_exhaustive<S: DenseScorer + ?Sized>(
    ranking: &[ScoredDoc],
    scorer: &S,
    cfg: &InterpolationConfig,
    stats: &mut RerankStats,
) -> Result<Vec<Candidate>> {
    let depth = ranking.len().min(cfg.k_s);
    let mut out = Vec::with_capacity(depth);
    for (rank, doc) in ranking[..depth].iter().enumerate() {
        let score = match dense_or_skip(scorer, &doc.doc_id, cfg.on_missing, stats)? {
            Some(dense) => mix(cfg.alpha, doc.score, dense),
            None => cfg.alpha * doc.score,
        };
        out.push(Candidate { score, rank });
    }
    Ok(out)
}

/// The early-stopping scan. Returns the queue contents, unsorted.
pub(crate) fn score_early_stop<S: DenseScorer + ?Sized>(
    ranking: &[ScoredDoc],
    scorer: &S,
    cfg: &InterpolationConfig,
    stats: &mut RerankStats,
) -> Result<Vec<Candidate>> {
    let alpha = cfg.alpha;
    let mut s_dense = match cfg.mode {
        Mode::EarlyStopWithBound(bound) => bound,
        _ => f64::NEG_INFINITY,
    };
    let mut queue: BinaryHeap<Reverse<Candidate>> = BinaryHeap::with_capacity(cfg.k + 1);
    let mut s_min: Option<Candidate> = None;

    for (rank, doc) in ranking.iter().take(cfg.k_s).enumerate() {
        if queue.len() == cfg.k {
            let Reverse(min) = queue.pop().expect("queue is full");
            s_min = Some(min);
            let s_best = if s_dense == f64::NEG_INFINITY {
                // nothing observed yet: only the sparse term can contribute
                if alpha == 1.0 {
                    doc.score
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                mix(alpha, doc.score, s_dense)
            };
            if s_best <= min.score {
                queue.push(Reverse(min));
                stats.early_stops += 1;
                break;
            }
        }
        let score = match dense_or_skip(scorer, &doc.doc_id, cfg.on_missing, stats)? {
            Some(dense) => {
                s_dense = s_dense.max(dense);
                mix(alpha, doc.score, dense)
            }
            None => alpha * doc.score,
        };
        let candidate = Candidate { score, rank };
        let keep = match s_min {
            Some(m) if m > candidate => m,
            _ => candidate,
        };
        queue.push(Reverse(keep));
    }
    Ok(queue.into_iter().map(|Reverse(c)| c).collect())
}

/// Sorts candidates best-first, keeps the top `k`, and resolves doc IDs.
pub(crate) fn finalize(
    mut candidates: Vec<Candidate>,
    k: usize,
    ranking: &[ScoredDoc],
) -> Vec<ScoredDoc> {
    candidates.sort_unstable_by(|a, b| b.cmp(a));
    candidates.truncate(k);
    candidates
        .into_iter()
        .map(|c| ScoredDoc {
            doc_id: ranking[c.rank].doc_id.clone(),
            score: c.score,
        })
        .collect()
}

/// Scores the top `k_s` sparse candidates and returns the best `k`.
pub fn rerank_exhaustive<S: DenseScorer + ?Sized>(
    ranking: &[ScoredDoc],
    scorer: &S,
    cfg: &InterpolationConfig,
) -> Result<(Vec<ScoredDoc>, RerankStats)> {
    let mut stats = RerankStats {
        queries: 1,
        ..Default::default()
    };
    let candidates = score_exhaustive(ranking, scorer, cfg, &mut stats)?;
    Ok((finalize(candidates, cfg.k, ranking), stats))
}

/// Early-stopping top-`k` interpolation. `ranking` must be sorted by
/// descending sparse score. With [`Mode::Exhaustive`] this falls back to
/// the running-max bound.
pub fn rerank_early_stop<S: DenseScorer + ?Sized>(
    ranking: &[ScoredDoc],
    scorer: &S,
    cfg: &InterpolationConfig,
) -> Result<(Vec<ScoredDoc>, RerankStats)> {
    let mut stats = RerankStats {
        queries: 1,
        ..Default::default()
    };
    let candidates = score_early_stop(ranking, scorer, cfg, &mut stats)?;
    Ok((finalize(candidates, cfg.k, ranking), stats))
}

/// Dispatches on the configured mode.
pub fn rerank_query<S: DenseScorer + ?Sized>(
    ranking: &[ScoredDoc],
    scorer: &S,
    cfg: &InterpolationConfig,
) -> Result<(Vec<ScoredDoc>, RerankStats)> {
    match cfg.mode {
        Mode::Exhaustive => rerank_exhaustive(ranking, scorer, cfg),
        _ => rerank_early_stop(ranking, scorer, cfg),
    }
}

/// Re-ranks every query of a sparse run against a shared index. Queries are
/// independent; with `threads > 1` they are spread over a worker pool.
pub fn rerank_run(
    run: &RankedRun,
    index: &ForwardIndex,
    queries: &HashMap<String, DenseVector>,
    cfg: &InterpolationConfig,
    threads: usize,
) -> Result<(RankedRun, RerankStats)> {
    let work =
        |(qid, ranking): (&str, &[ScoredDoc])| -> Result<(String, Vec<ScoredDoc>, RerankStats)> {
            let query = queries
                .get(qid)
                .ok_or_else(|| Error::MissingQuery(qid.to_owned()))?;
            let scorer = IndexScorer::new(index, query)?;
            let (docs, stats) = rerank_query(ranking, &scorer, cfg)?;
            Ok((qid.to_owned(), docs, stats))
        };
    let results: Vec<_> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
        let items: Vec<_> = run.iter().collect();
        pool.install(|| items.into_par_iter().map(work).collect::<Result<Vec<_>>>())?
    } else {
        run.iter().map(work).collect::<Result<Vec<_>>>()?
    };
    let mut out = RankedRun::new(DEFAULT_TAG);
    let mut stats = RerankStats::default();
    for (qid, docs, s) in results {
        out.insert(qid, docs)?;
        stats = stats.merge(s);
    }
    Ok((out, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HybridStats {
    /// Sparse queries with no dense ranking at all.
    pub queries_without_dense: usize,
    /// Sparse candidates that fell back to their sparse score.
    pub fallbacks: usize,
}

/// Merges a sparse and a dense run over the sparse candidate set only.
/// Documents without a dense score fall back to `φ_S` for both terms.
pub fn hybrid_score(
    sparse: &RankedRun,
    dense: &RankedRun,
    alpha: f64,
) -> Result<(RankedRun, HybridStats)> {
    check_alpha(alpha)?;
    let mut out = RankedRun::new(sparse.tag());
    let mut stats = HybridStats::default();
    for (qid, ranking) in sparse.iter() {
        let dense_scores: HashMap<&str, f64> = match dense.get(qid) {
            Some(docs) => docs.iter().map(|d| (d.doc_id.as_str(), d.score)).collect(),
            None => {
                stats.queries_without_dense += 1;
                HashMap::new()
            }
        };
        let candidates = ranking
            .iter()
            .enumerate()
            .map(|(rank, d)| {
                // α·φ_S + (1−α)·φ_S collapses to φ_S exactly
                let score = match dense_scores.get(d.doc_id.as_str()) {
                    Some(&dense) => mix(alpha, d.score, dense),
                    None => {
                        stats.fallbacks += 1;
                        d.score
                    }
                };
                Candidate { score, rank }
            })
            .collect();
        out.insert(qid, finalize(candidates, usize::MAX, ranking))?;
    }
    if stats.queries_without_dense > 0 {
        log::warn!(
            "{} sparse queries have no dense ranking; using sparse scores",
            stats.queries_without_dense
        );
    }
    Ok((out, stats))
}

/// Fraction of `reference`'s top-`k` documents missing from `approx`'s
/// top-`k`. Measures how far an approximate ranking strays from the exact one.
pub fn topk_mismatch(reference: &[ScoredDoc], approx: &[ScoredDoc], k: usize) -> f64 {
    let k = k.min(reference.len());
    if k == 0 {
        return 0.0;
    }
    let approx: HashSet<&str> = approx.iter().take(k).map(|d| d.doc_id.as_str()).collect();
    let missing = reference[..k]
        .iter()
        .filter(|d| !approx.contains(d.doc_id.as_str()))
        .count();
    missing as f64 / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(scores: &[f64]) -> Vec<ScoredDoc> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| ScoredDoc::new(format!("d{}", i + 1), s))
            .collect()
    }

    fn dense(scores: &[f64]) -> HashMap<String, f64> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| (format!("d{}", i + 1), s))
            .collect()
    }

    #[test]
    fn interpolate_examples() {
        assert_eq!(interpolate(0.3, 0.8, 0.0).unwrap(), 0.8);
        assert_eq!(interpolate(0.3, 0.8, 1.0).unwrap(), 0.3);
        assert!((interpolate(0.32, 0.61, 0.5).unwrap() - 0.465).abs() < 1e-12);
        assert!(matches!(interpolate(0.0, 0.0, 1.5), Err(Error::Domain(_))));
        assert!(matches!(interpolate(0.0, 0.0, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn config_validation() {
        assert!(InterpolationConfig::new(0.5, 10, 0, Mode::Exhaustive).is_err());
        assert!(InterpolationConfig::new(0.5, 10, 11, Mode::Exhaustive).is_err());
        assert!(InterpolationConfig::new(1.1, 10, 1, Mode::Exhaustive).is_err());
        assert!(InterpolationConfig::new(0.5, 10, 1, Mode::EarlyStopWithBound(f64::NAN)).is_err());
        let cfg = InterpolationConfig::new(0.2, 10, 10, Mode::Exhaustive).unwrap();
        assert_eq!(cfg.missing_policy(), MissingPolicy::Abort);
    }

    #[test]
    fn signed_zeros_tie() {
        // 0·φ_S + 1·(−0.0) is −0.0 when φ_S is negative
        let run = ranking(&[-1.0, -2.0]);
        let cfg = InterpolationConfig::new(0.0, 2, 2, Mode::Exhaustive).unwrap();
        let (top, _) = rerank_exhaustive(&run, &dense(&[-0.0, 0.0]), &cfg).unwrap();
        assert_eq!(top[0].doc_id, "d1");
        let (top, _) = rerank_exhaustive(&run, &dense(&[0.0, -0.0]), &cfg).unwrap();
        assert_eq!(top[0].doc_id, "d1");
    }

    #[test]
    fn early_stop_hand_trace() {
        let run = ranking(&[0.9, 0.8, 0.1]);
        let scores = dense(&[0.5, 0.9, 0.2]);
        let cfg = InterpolationConfig::new(0.5, 3, 1, Mode::EarlyStopWithBound(0.9)).unwrap();
        let (top, stats) = rerank_early_stop(&run, &scores, &cfg).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].doc_id, "d2");
        // bit-identical to the interpolation formula; 0.85 up to rounding
        assert_eq!(top[0].score, 0.5 * 0.8 + (1.0 - 0.5) * 0.9);
        assert!((top[0].score - 0.85).abs() < 1e-12);
        assert_eq!(stats.lookups, 2);
        assert_eq!(stats.early_stops, 1);
    }

    #[test]
    fn exhaustive_hand_computed() {
        // α = 0.5: d1 → 0.7, d2 → 0.85, d3 → 0.15
        let run = ranking(&[0.9, 0.8, 0.1]);
        let scores = dense(&[0.5, 0.9, 0.2]);
        let cfg = InterpolationConfig::new(0.5, 3, 3, Mode::Exhaustive).unwrap();
        let (top, stats) = rerank_exhaustive(&run, &scores, &cfg).unwrap();
        let ids: Vec<_> = top.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["d2", "d1", "d3"]);
        assert!((top[0].score - 0.85).abs() < 1e-15);
        assert!((top[1].score - 0.7).abs() < 1e-15);
        assert!((top[2].score - 0.15).abs() < 1e-15);
        assert_eq!(stats.lookups, 3);
    }

    #[test]
    fn single_document_run() {
        let run = ranking(&[2.0]);
        let scores = dense(&[4.0]);
        for mode in [Mode::Exhaustive, Mode::EarlyStopRunningMax] {
            let cfg = InterpolationConfig::new(0.25, 100, 10, mode).unwrap();
            let (top, stats) = rerank_query(&run, &scores, &cfg).unwrap();
            assert_eq!(top, vec![ScoredDoc::new("d1", 3.5)]);
            assert_eq!(stats.lookups, 1);
        }
    }

    #[test]
    fn sparse_only_keeps_sparse_order() {
        let run = ranking(&[5.0, 4.0, 4.0, 1.0]);
        let scores = dense(&[0.0, 9.0, 3.0, 100.0]);
        let cfg = InterpolationConfig::new(1.0, 4, 3, Mode::Exhaustive).unwrap();
        for mode in [Mode::Exhaustive, Mode::EarlyStopRunningMax] {
            let (top, _) = rerank_query(&run, &scores, &cfg.with_mode(mode)).unwrap();
            assert_eq!(top, run[..3].to_vec());
        }
    }

    #[test]
    fn run_longer_than_depth_is_truncated() {
        let run = ranking(&[0.9, 0.8, 0.7, 0.6]);
        let scores = dense(&[0.0, 0.0, 0.0, 10.0]);
        let cfg = InterpolationConfig::new(0.5, 3, 3, Mode::Exhaustive).unwrap();
        let (top, stats) = rerank_exhaustive(&run, &scores, &cfg).unwrap();
        assert_eq!(stats.lookups, 3);
        assert!(top.iter().all(|d| d.doc_id != "d4"));
    }

    #[test]
    fn missing_document_policies() {
        let run = ranking(&[0.9, 0.8]);
        let mut scores = dense(&[0.5, 0.0]);
        scores.remove("d2");
        let cfg = InterpolationConfig::new(0.5, 2, 2, Mode::Exhaustive).unwrap();
        assert!(matches!(
            rerank_exhaustive(&run, &scores, &cfg),
            Err(Error::MissingDocument(d)) if d == "d2"
        ));
        let cfg = cfg.with_missing_policy(MissingPolicy::Skip);
        for mode in [Mode::Exhaustive, Mode::EarlyStopRunningMax] {
            let (top, stats) = rerank_query(&run, &scores, &cfg.with_mode(mode)).unwrap();
            assert_eq!(top[1], ScoredDoc::new("d2", 0.4));
            assert_eq!(stats.missing, 1);
        }
    }

    #[test]
    fn queue_size_equal_to_depth_never_stops() {
        let run = ranking(&[0.9, 0.5, 0.4, 0.1]);
        let scores = dense(&[0.1, 0.3, 0.9, 0.2]);
        let cfg = InterpolationConfig::new(0.3, 4, 4, Mode::EarlyStopRunningMax).unwrap();
        let (es, s) = rerank_early_stop(&run, &scores, &cfg).unwrap();
        let (ex, _) = rerank_exhaustive(&run, &scores, &cfg).unwrap();
        assert_eq!(es, ex);
        assert_eq!(s.early_stops, 0);
    }

    #[test]
    fn all_missing_with_running_max_and_pure_sparse() {
        let run = ranking(&[0.9, 0.8, 0.7]);
        let scores: HashMap<String, f64> = HashMap::new();
        let cfg = InterpolationConfig::new(1.0, 3, 1, Mode::EarlyStopRunningMax)
            .unwrap()
            .with_missing_policy(MissingPolicy::Skip);
        let (top, stats) = rerank_early_stop(&run, &scores, &cfg).unwrap();
        assert_eq!(top, vec![ScoredDoc::new("d1", 0.9)]);
        assert_eq!(stats.lookups, 1);
    }

    #[test]
    fn hybrid_examples() {
        let mut sparse = RankedRun::new("bm25");
        sparse
            .insert(
                "q",
                vec![ScoredDoc::new("a", 0.4), ScoredDoc::new("b", 0.3)],
            )
            .unwrap();
        let mut dense_run = RankedRun::new("dense");
        dense_run
            .insert(
                "q",
                vec![ScoredDoc::new("z", 0.99), ScoredDoc::new("a", 0.6)],
            )
            .unwrap();
        let (out, stats) = hybrid_score(&sparse, &dense_run, 0.5).unwrap();
        let q = out.get("q").unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].doc_id, "a");
        assert!((q[0].score - 0.5).abs() < 1e-12);
        assert_eq!(q[1], ScoredDoc::new("b", 0.3));
        assert_eq!(stats.fallbacks, 1);

        let (out, stats) = hybrid_score(&sparse, &RankedRun::new("empty"), 0.7).unwrap();
        assert_eq!(stats.queries_without_dense, 1);
        assert_eq!(out.get("q"), sparse.get("q"));
    }

    #[test]
    fn mismatch_rate() {
        let a = ranking(&[3.0, 2.0, 1.0]);
        let mut b = a.clone();
        assert_eq!(topk_mismatch(&a, &b, 2), 0.0);
        b.swap(1, 2);
        assert_eq!(topk_mismatch(&a, &b, 2), 0.5);
        assert_eq!(topk_mismatch(&a, &b, 3), 0.0);
    }
}
