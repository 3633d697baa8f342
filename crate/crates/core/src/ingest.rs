//! Building forward indexes from interchange inputs.
//!
//! Passage vectors are inserted as given. Passage texts are encoded with the
//! embedding-average encoder, optionally after token filtering.

use crate::encode::QueryEncoder;
use crate::error::{Error, Result};
use crate::index::ForwardIndex;
use crate::selective::{self, IdfScorer, TokenBatch};
use crate::vector::{self, DenseVector};

pub const PAD_TOKEN: &str = "[PAD]";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Fraction of tokens kept per batch; `None` encodes every token.
    pub keep_ratio: Option<f64>,
    /// Passages per filtering batch. The cut is relative to the longest
    /// passage of the batch.
    pub batch_size: usize,
    pub normalize: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            keep_ratio: None,
            batch_size: 32,
            normalize: false,
        }
    }
}

fn finish(v: DenseVector, normalize: bool) -> Result<DenseVector> {
    if normalize {
        vector::l2_normalize(&v)
    } else {
        Ok(v)
    }
}

pub fn index_from_vectors(
    docs: Vec<(String, Vec<DenseVector>)>,
    normalize: bool,
) -> Result<ForwardIndex> {
    let dim = docs
        .first()
        .and_then(|(_, p)| p.first())
        .map(DenseVector::dim)
        .ok_or(Error::EmptyInput("no passages"))?;
    let docs = docs
        .into_iter()
        .map(|(id, ps)| {
            let ps = ps
                .into_iter()
                .map(|v| finish(v, normalize))
                .collect::<Result<Vec<_>>>()?;
            Ok((id, ps))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut index = ForwardIndex::new(dim, normalize)?;
    index.add_documents(&docs)?;
    Ok(index)
}

pub fn index_from_texts(
    docs: &[(String, Vec<String>)],
    encoder: &QueryEncoder,
    opts: &BuildOptions,
) -> Result<ForwardIndex> {
    if opts.batch_size == 0 {
        return Err(Error::domain("batch size must be positive"));
    }
    if docs.is_empty() {
        return Err(Error::EmptyInput("no passages"));
    }
    // (doc position, passage tokens), flattened in input order
    let mut passages: Vec<(usize, Vec<String>)> = Vec::new();
    for (d, (_, texts)) in docs.iter().enumerate() {
        passages.extend(texts.iter().map(|t| (d, encoder.tokenize(t))));
    }

    if let Some(p) = opts.keep_ratio {
        let scorer = IdfScorer::fit(
            passages
                .iter()
                .map(|(_, toks)| toks.iter().map(String::as_str)),
        );
        for chunk in passages.chunks_mut(opts.batch_size) {
            let rows = chunk.iter().map(|(_, t)| t.clone()).collect();
            let kept = selective::select_tokens(&TokenBatch::new(rows, PAD_TOKEN), &scorer, p)?;
            for (i, (_, toks)) in chunk.iter_mut().enumerate() {
                *toks = kept.real_tokens(i).map(String::from).collect();
            }
        }
    }

    let mut out: Vec<(String, Vec<DenseVector>)> = docs
        .iter()
        .map(|(id, _)| (id.clone(), Vec::new()))
        .collect();
    let mut counts = vec![0usize; docs.len()];
    for (d, toks) in &passages {
        let v = encoder.encode_tokens(toks).map_err(|e| match e {
            Error::EmptyQuery => Error::domain(format!(
                "passage {} of document {} has no known tokens",
                counts[*d], docs[*d].0
            )),
            e => e,
        })?;
        counts[*d] += 1;
        out[*d].1.push(finish(v, opts.normalize)?);
    }

    let mut index = ForwardIndex::new(encoder.output_dim(), opts.normalize)?;
    index.add_documents(&out)?;
    Ok(index)
}
