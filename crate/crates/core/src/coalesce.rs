//! Sequential coalescing of maxP indexes.
//!
//! Within a document, consecutive passage vectors are folded into a running
//! average. When the next vector is at least `delta` away (cosine distance)
//! from the current average, the average is emitted and a new run starts.
//! The final run is always emitted. Only consecutive passages are ever merged.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::index::ForwardIndex;

/// Size accounting for one coalescing pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoalescingReport {
    pub docs_processed: usize,
    pub vectors_before: usize,
    pub vectors_after: usize,
    pub delta: f64,
}

impl CoalescingReport {
    /// Fraction of vectors removed, in `[0, 1)`.
    pub fn reduction(&self) -> f64 {
        if self.vectors_before == 0 {
            return 0.0;
        }
        1.0 - self.vectors_after as f64 / self.vectors_before as f64
    }
}

/// One emitted vector and the contiguous passage run it averages.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalescedRun {
    pub passages: Range<usize>,
    pub vector: Vec<f32>,
}

struct Accumulator {
    sum: Vec<f64>,
    count: usize,
    start: usize,
}

impl Accumulator {
    fn new(dim: usize) -> Self {
        Self {
            sum: vec![0.0; dim],
            count: 0,
            start: 0,
        }
    }

    fn add(&mut self, v: &[f32]) {
        for (s, &x) in self.sum.iter_mut().zip(v) {
            *s += f64::from(x);
        }
        self.count += 1;
    }

    fn mean(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.count as f64;
        self.sum.iter().map(move |s| s / n)
    }

    fn flush(&mut self, end: usize) -> CoalescedRun {
        let run = CoalescedRun {
            passages: self.start..end,
            vector: self.mean().map(|x| x as f32).collect(),
        };
        self.sum.iter_mut().for_each(|s| *s = 0.0);
        self.count = 0;
        self.start = end;
        run
    }

    /// Cosine distance from `v` to the running mean, clamped to `[0, 2]`.
    /// A zero vector on either side counts as orthogonal (distance 1).
    fn distance(&self, v: &[f32]) -> f64 {
        let (mut dot, mut nv, mut nm) = (0f64, 0f64, 0f64);
        for (m, &x) in self.mean().zip(v) {
            let x = f64::from(x);
            dot += x * m;
            nv += x * x;
            nm += m * m;
        }
        if nv == 0.0 || nm == 0.0 {
            return 1.0;
        }
        (1.0 - dot / (nv.sqrt() * nm.sqrt())).clamp(0.0, 2.0)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::domain(format!("delta must be >= 0, got {delta}")));
    }
    Ok(())
}

/// Coalesces one document's passages (rows of length `dim`, original order).
pub fn coalesce_passages<'a>(
    passages: impl IntoIterator<Item = &'a [f32]>,
    dim: usize,
    delta: f64,
) -> Result<Vec<CoalescedRun>> {
    check_delta(delta)?;
    let mut out = Vec::new();
    let mut acc = Accumulator::new(dim);
    let mut i = 0;
    for v in passages {
        if v.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: v.len(),
            });
        }
        if acc.count > 0 && acc.distance(v) >= delta {
            out.push(acc.flush(i));
        }
        acc.add(v);
        i += 1;
    }
    if acc.count > 0 {
        out.push(acc.flush(i));
    }
    Ok(out)
}

/// Coalesces every document of `index`. The output keeps the document set
/// and order; its vectors are plain averages, so the normalized flag is
/// cleared.
pub fn coalesce(index: &ForwardIndex, delta: f64) -> Result<(ForwardIndex, CoalescingReport)> {
    check_delta(delta)?;
    let mut out = ForwardIndex::new(index.dim(), false)?;
    for (id, passages) in index.iter() {
        let runs = coalesce_passages(passages.iter(), index.dim(), delta)?;
        out.push_unchecked(id, runs.iter().map(|r| r.vector.as_slice()));
    }
    let report = CoalescingReport {
        docs_processed: index.num_docs(),
        vectors_before: index.num_vectors(),
        vectors_after: out.num_vectors(),
        delta,
    };
    Ok((out, report))
}
