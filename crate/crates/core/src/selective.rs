//! Inference-time token retention for document encoding.
//!
//! Each token of a padded batch is scored in `[0, 1]`; rows are cut down to
//! `ceil(p · max_len)` tokens by dropping padding first and then the
//! lowest-scoring real tokens. Survivors keep their relative order.

use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBatch {
    rows: Vec<Vec<String>>,
    pad_token: String,
    max_len: usize,
}

impl TokenBatch {
    /// Pads every row with `pad_token` to the length of the longest row.
    pub fn new(mut rows: Vec<Vec<String>>, pad_token: impl Into<String>) -> Self {
        let pad_token = pad_token.into();
        let max_len = rows.iter().map(Vec::len).max().unwrap_or(0);
        for row in &mut rows {
            row.resize(max_len, pad_token.clone());
        }
        Self {
            rows,
            pad_token,
            max_len,
        }
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn pad_token(&self) -> &str {
        &self.pad_token
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Row `i` without padding.
    pub fn real_tokens(&self, i: usize) -> impl Iterator<Item = &str> {
        self.rows[i]
            .iter()
            .map(String::as_str)
            .filter(move |t| *t != self.pad_token)
    }

    pub fn into_rows(self) -> Vec<Vec<String>> {
        self.rows
    }
}

/// Relevance of a single token, in `[0, 1]`.
pub trait TokenScorer {
    fn score(&self, token: &str) -> f64;
}

impl<F: Fn(&str) -> f64> TokenScorer for F {
    fn score(&self, token: &str) -> f64 {
        self(token)
    }
}

/// Inverse collection frequency, scaled into `(0, 1]`. Rare tokens score
/// high, frequent ones low; tokens never seen and special tokens score 1.
#[derive(Debug, Clone)]
pub struct IdfScorer {
    weights: HashMap<String, f64>,
    special: Vec<String>,
}

impl IdfScorer {
    pub fn fit<'a, I, D>(docs: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut total = 0u64;
        for doc in docs {
            for t in doc {
                *counts.entry(t.to_owned()).or_default() += 1;
                total += 1;
            }
        }
        let total = total as f64;
        let max = (1.0 + total).ln();
        let weights = counts
            .into_iter()
            .map(|(t, cf)| (t, (1.0 + total / cf as f64).ln() / max))
            .collect();
        Self {
            weights,
            special: vec!["[CLS]".into(), "[SEP]".into()],
        }
    }

    pub fn with_special_tokens(mut self, special: Vec<String>) -> Self {
        self.special = special;
        self
    }
}

impl TokenScorer for IdfScorer {
    fn score(&self, token: &str) -> f64 {
        if self.special.iter().any(|s| s == token) {
            return 1.0;
        }
        self.weights
            .get(token)
            .copied()
            .unwrap_or(1.0)
            .clamp(0.0, 1.0)
    }
}

/// Target row length for keep ratio `p`. The small slack keeps products such
/// as `0.7 · 10` from rounding up past the intended integer.
pub fn target_len(p: f64, max_len: usize) -> usize {
    ((p * max_len as f64) - 1e-9).ceil().max(0.0) as usize
}

pub fn select_tokens<S: TokenScorer + ?Sized>(
    batch: &TokenBatch,
    scorer: &S,
    p: f64,
) -> Result<TokenBatch> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!(
            "keep ratio must be in [0, 1], got {p}"
        )));
    }
    let target = target_len(p, batch.max_len);
    let mut kept_rows = Vec::with_capacity(batch.rows.len());
    for row in &batch.rows {
        let mut real: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for (i, t) in row.iter().enumerate() {
            if *t == batch.pad_token {
                continue;
            }
            let s = scorer.score(t);
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::domain(format!(
                    "token score {s} for {t:?} outside [0, 1]"
                )));
            }
            real.push((i, s));
        }
        if real.len() > target {
            // best first; equal scores keep the earlier position
            real.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            real.truncate(target);
            real.sort_by_key(|&(i, _)| i);
        }
        kept_rows.push(real.into_iter().map(|(i, _)| row[i].clone()).collect());
    }
    Ok(TokenBatch::new(kept_rows, batch.pad_token.clone()))
}
