//! Seeded synthetic data for self-tests and benchmarks.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::index::ForwardIndex;
use crate::run::{RankedRun, ScoredDoc};
use crate::vector::DenseVector;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn doc_id(i: usize) -> String {
    format!("D{i}")
}

/// A sparse ranking of `k_s` documents (descending scores in `[0, 10)`) and
/// matching dense scores. With `correlation = 0` the dense scores are
/// independent of the sparse ones; with `1` they follow the sparse order.
pub fn score_instance<R: Rng>(
    rng: &mut R,
    k_s: usize,
    correlation: f64,
) -> (Vec<ScoredDoc>, HashMap<String, f64>) {
    let mut sparse: Vec<f64> = (0..k_s).map(|_| rng.random::<f64>() * 10.0).collect();
    sparse.sort_by(|a, b| b.total_cmp(a));
    let mut ranking = Vec::with_capacity(k_s);
    let mut dense = HashMap::with_capacity(k_s);
    for (i, &s) in sparse.iter().enumerate() {
        let id = doc_id(i);
        let d = correlation * (s / 10.0) + (1.0 - correlation) * rng.random::<f64>();
        dense.insert(id.clone(), d * 100.0 - 20.0);
        ranking.push(ScoredDoc::new(id, s));
    }
    (ranking, dense)
}

fn unit_gaussianish<R: Rng>(rng: &mut R, dim: usize) -> Vec<f32> {
    // sum of uniforms, centered: cheap and bounded
    (0..dim)
        .map(|_| (0..4).map(|_| rng.random::<f32>()).sum::<f32>() - 2.0)
        .collect()
}

/// Documents whose passages come in contiguous runs around a few topic
/// directions, so neighbouring passages tend to be similar.
pub fn clustered_index<R: Rng>(
    rng: &mut R,
    docs: usize,
    dim: usize,
    max_passages: usize,
    noise: f32,
) -> ForwardIndex {
    let mut index = ForwardIndex::new(dim, false).expect("dim > 0");
    for d in 0..docs {
        let n = rng.random_range(1..=max_passages);
        let mut passages = Vec::with_capacity(n);
        let mut topic = unit_gaussianish(rng, dim);
        for _ in 0..n {
            if rng.random::<f64>() < 0.3 {
                topic = unit_gaussianish(rng, dim);
            }
            let v: Vec<f32> = topic
                .iter()
                .map(|&t| t + noise * (rng.random::<f32>() - 0.5))
                .collect();
            passages.push(DenseVector::new(v).expect("finite"));
        }
        index.insert(&doc_id(d), &passages).expect("fresh id");
    }
    index
}

/// Index, one-query-per-entry sparse run and query vectors for benchmarks.
pub struct Collection {
    pub index: ForwardIndex,
    pub run: RankedRun,
    pub queries: HashMap<String, DenseVector>,
}

pub fn collection<R: Rng>(
    rng: &mut R,
    docs: usize,
    dim: usize,
    max_passages: usize,
    num_queries: usize,
    k_s: usize,
) -> Collection {
    let index = clustered_index(rng, docs, dim, max_passages, 0.5);
    let mut run = RankedRun::new("synthetic");
    let mut queries = HashMap::new();
    for q in 0..num_queries {
        let qid = format!("Q{q}");
        let mut picked: Vec<usize> = rand::seq::index::sample(rng, docs, k_s.min(docs)).into_vec();
        picked.sort_unstable();
        let mut scores: Vec<f64> = (0..picked.len())
            .map(|_| rng.random::<f64>() * 30.0)
            .collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        let ranking = picked
            .iter()
            .zip(scores)
            .map(|(&d, s)| ScoredDoc::new(doc_id(d), s))
            .collect();
        run.insert(qid.clone(), ranking).expect("sorted and unique");
        queries.insert(
            qid,
            DenseVector::new(unit_gaussianish(rng, dim)).expect("finite"),
        );
    }
    Collection {
        index,
        run,
        queries,
    }
}
