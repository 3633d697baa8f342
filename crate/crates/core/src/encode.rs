//! Query-side encoding.
//!
//! The lightweight encoder represents a query as the mean of its token
//! embeddings, with no contextualization. Vectors produced by heavier
//! encoders enter through [`load_precomputed_queries`] instead.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::{self, Lines};
use crate::vector::{self, DenseVector, Projection};

pub const SUBWORD_PREFIX: &str = "##";
pub const CLS_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "[SEP]";

/// How tokens missing from the embedding table are handled.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum UnkPolicy {
    #[default]
    Skip,
    Error,
    /// Substitute the embedding of this token, which must be in the table.
    UnkToken(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, DenseVector>,
    unk_policy: UnkPolicy,
    subwords: bool,
}

impl EmbeddingTable {
    pub fn new(dim: usize, entries: HashMap<String, DenseVector>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput("embedding table has no tokens"));
        }
        if let Some(v) = entries.values().find(|v| v.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                actual: v.dim(),
            });
        }
        let subwords = entries.keys().any(|k| k.starts_with(SUBWORD_PREFIX));
        Ok(Self {
            dim,
            entries,
            unk_policy: UnkPolicy::Skip,
            subwords,
        })
    }

    pub fn with_unk_policy(mut self, policy: UnkPolicy) -> Result<Self> {
        if let UnkPolicy::UnkToken(t) = &policy {
            if !self.entries.contains_key(t) {
                return Err(Error::UnknownToken(t.clone()));
            }
        }
        self.unk_policy = policy;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&DenseVector> {
        self.entries.get(token)
    }

    pub fn unk_policy(&self) -> &UnkPolicy {
        &self.unk_policy
    }

    /// True when the vocabulary carries `##` continuation pieces.
    pub fn has_subwords(&self) -> bool {
        self.subwords
    }
}

/// Greedy longest-match split of one word; `None` if some suffix cannot be
/// matched, in which case the whole word is unknown.
fn split_subwords(word: &str, table: &EmbeddingTable) -> Option<Vec<String>> {
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let from = chars[start].0;
        let piece = (start + 1..=chars.len()).rev().find_map(|end| {
            let to = chars.get(end).map_or(word.len(), |c| c.0);
            let piece = if start == 0 {
                word[from..to].to_owned()
            } else {
                format!("{SUBWORD_PREFIX}{}", &word[from..to])
            };
            table.entries.contains_key(&piece).then_some((piece, end))
        });
        let (piece, end) = piece?;
        pieces.push(piece);
        start = end;
    }
    Some(pieces)
}

/// Lowercases, strips punctuation and splits on whitespace. If the table has
/// subword pieces, each word is further split by greedy longest match; words
/// that cannot be split are kept whole and left to the unknown-token policy.
pub fn tokenize(text: &str, table: &EmbeddingTable) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    let mut tokens = Vec::new();
    for word in cleaned.split_whitespace() {
        if table.subwords && !table.entries.contains_key(word) {
            match split_subwords(word, table) {
                Some(pieces) => tokens.extend(pieces),
                None => tokens.push(word.to_owned()),
            }
        } else {
            tokens.push(word.to_owned());
        }
    }
    tokens
}

/// Mean of the embeddings of the tokens that resolve under the table's
/// unknown-token policy. Skipped tokens do not count towards the divisor.
pub fn encode_embedding_average<T: AsRef<str>>(
    tokens: &[T],
    table: &EmbeddingTable,
) -> Result<DenseVector> {
    let mut resolved: Vec<&[f32]> = Vec::with_capacity(tokens.len());
    for t in tokens {
        let t = t.as_ref();
        match (table.entries.get(t), &table.unk_policy) {
            (Some(v), _) => resolved.push(v),
            (None, UnkPolicy::Skip) => {}
            (None, UnkPolicy::Error) => return Err(Error::UnknownToken(t.to_owned())),
            (None, UnkPolicy::UnkToken(unk)) => resolved.push(&table.entries[unk]),
        }
    }
    if resolved.is_empty() {
        return Err(Error::EmptyQuery);
    }
    vector::mean(&resolved)
}

/// Applies the optional projection. The result is deliberately left
/// unnormalized: scaling a query only scales its dense scores.
pub fn finalize_query(raw: &DenseVector, projection: Option<&Projection>) -> Result<DenseVector> {
    match projection {
        Some(p) => vector::project(p, raw),
        None => Ok(raw.clone()),
    }
}

/// Text-to-vector encoder built on an embedding table.
#[derive(Debug, Clone)]
pub struct QueryEncoder {
    table: EmbeddingTable,
    projection: Option<Projection>,
    include_special: bool,
}

impl QueryEncoder {
    pub fn new(table: EmbeddingTable) -> Self {
        Self {
            table,
            projection: None,
            include_special: false,
        }
    }

    pub fn with_projection(mut self, projection: Projection) -> Result<Self> {
        if projection.dim_in() != self.table.dim() {
            return Err(Error::Dimension {
                expected: self.table.dim(),
                actual: projection.dim_in(),
            });
        }
        self.projection = Some(projection);
        Ok(self)
    }

    /// Also average `[CLS]`/`[SEP]` embeddings when the table has them.
    pub fn with_special_tokens(mut self, include: bool) -> Self {
        self.include_special = include;
        self
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn output_dim(&self) -> usize {
        self.projection
            .as_ref()
            .map_or(self.table.dim(), Projection::dim_out)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = tokenize(text, &self.table);
        if self.include_special {
            for (special, front) in [(CLS_TOKEN, true), (SEP_TOKEN, false)] {
                if self.table.entries.contains_key(special) {
                    if front {
                        tokens.insert(0, special.to_owned());
                    } else {
                        tokens.push(special.to_owned());
                    }
                }
            }
        }
        tokens
    }

    pub fn encode_tokens<T: AsRef<str>>(&self, tokens: &[T]) -> Result<DenseVector> {
        let raw = encode_embedding_average(tokens, &self.table)?;
        finalize_query(&raw, self.projection.as_ref())
    }

    pub fn encode(&self, text: &str) -> Result<DenseVector> {
        self.encode_tokens(&self.tokenize(text))
    }
}

/// Parses the embedding-table format: a `#dim <d>` header, then
/// `token<TAB>floats` lines.
pub fn parse_embedding_table(content: &str) -> Result<EmbeddingTable> {
    let mut lines = Lines::new(content);
    let (offset, header) = lines
        .next()
        .ok_or_else(|| Error::format(0, "missing #dim header"))?;
    let dim: usize = header
        .strip_prefix("#dim")
        .and_then(|d| d.trim().parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::format(offset, format!("bad header {header:?}")))?;
    let mut entries = HashMap::new();
    for (offset, line) in lines {
        let (token, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(offset, "expected token<TAB>vector"))?;
        if token.is_empty() {
            return Err(Error::format(offset, "empty token"));
        }
        let v = text::parse_vector(values, offset)?;
        if v.dim() != dim {
            return Err(Error::format(
                offset,
                format!("vector has dimension {}, header says {dim}", v.dim()),
            ));
        }
        if entries.insert(token.to_owned(), v).is_some() {
            return Err(Error::format(offset, format!("duplicate token {token:?}")));
        }
    }
    if entries.is_empty() {
        return Err(Error::format(
            content.len() as u64,
            "embedding table has no tokens",
        ));
    }
    EmbeddingTable::new(dim, entries)
}

pub fn load_embedding_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    parse_embedding_table(&fs::read_to_string(path)?)
}

/// Parses `query_id<TAB>floats` lines. All vectors must share one dimension.
pub fn parse_query_vectors(content: &str) -> Result<HashMap<String, DenseVector>> {
    let mut out = HashMap::new();
    let mut dim = None;
    for (offset, line) in Lines::new(content) {
        let (qid, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(offset, "expected query_id<TAB>vector"))?;
        let v = text::parse_vector(values, offset)?;
        text::check_dim(&mut dim, v.dim(), offset)?;
        if out.insert(qid.to_owned(), v).is_some() {
            return Err(Error::format(offset, format!("duplicate query {qid}")));
        }
    }
    Ok(out)
}

pub fn load_precomputed_queries(path: impl AsRef<Path>) -> Result<HashMap<String, DenseVector>> {
    parse_query_vectors(&fs::read_to_string(path)?)
}

pub fn format_query_vectors<'a>(
    queries: impl IntoIterator<Item = (&'a str, &'a DenseVector)>,
) -> String {
    queries
        .into_iter()
        .map(|(q, v)| format!("{q}\t{}\n", text::format_vector(v)))
        .collect()
}

/// Parses `query_id<TAB>text` lines, keeping file order.
pub fn parse_query_texts(content: &str) -> Result<Vec<(String, String)>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (offset, line) in Lines::new(content) {
        let (qid, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(offset, "expected query_id<TAB>text"))?;
        if !seen.insert(qid.to_owned()) {
            return Err(Error::format(offset, format!("duplicate query {qid}")));
        }
        out.push((qid.to_owned(), text.to_owned()));
    }
    Ok(out)
}

pub fn load_query_texts(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    parse_query_texts(&fs::read_to_string(path)?)
}
