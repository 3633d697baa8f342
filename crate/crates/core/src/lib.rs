//! CPU re-ranking over pre-computed passage vectors.
//!
//! Sparse retrieval runs are re-scored by interpolating their lexical scores
//! with dense scores looked up in a forward index ([`ForwardIndex`]). The
//! crate also provides index compression by sequential coalescing,
//! early-stopping top-k interpolation, an embedding-average query encoder,
//! inference-time token filtering, and TREC-style evaluation.

pub mod bench;
pub mod coalesce;
pub mod encode;
pub mod error;
pub mod eval;
pub mod index;
pub mod ingest;
pub mod rerank;
pub mod run;
pub mod selective;
pub mod storage;
pub mod synth;
mod text;
pub mod vector;

pub use coalesce::{coalesce, CoalescingReport};
pub use encode::{EmbeddingTable, QueryEncoder, UnkPolicy};
pub use error::{Error, Result};
pub use eval::{evaluate, Metric, MetricReport, Qrels};
pub use index::ForwardIndex;
pub use rerank::{InterpolationConfig, MissingPolicy, Mode, RerankStats};
pub use run::{RankedRun, ScoredDoc};
pub use vector::{DenseVector, Projection};
