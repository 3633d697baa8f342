//! The forward index: document ID → ordered passage vectors.
//!
//! All passage vectors live in one contiguous `f32` block. Each document owns
//! a contiguous run of rows in that block, located through a hash map keyed by
//! document ID, so a lookup is a hash probe plus a slice.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::vector::{self, DenseVector};

#[derive(Debug, Clone, PartialEq)]
struct DocEntry {
    id: String,
    /// First row in `data`, in units of vectors.
    start: usize,
    len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardIndex {
    dim: usize,
    normalized: bool,
    data: Vec<f32>,
    docs: Vec<DocEntry>,
    by_id: HashMap<String, usize>,
}

/// Borrowed view of one document's passage vectors, in original order.
#[derive(Debug, Clone, Copy)]
pub struct Passages<'a> {
    data: &'a [f32],
    dim: usize,
}

impl<'a> Passages<'a> {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&'a [f32]> {
        self.data.get(i * self.dim..(i + 1) * self.dim)
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'a, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_vectors(&self) -> Vec<DenseVector> {
        self.iter()
            .map(|p| DenseVector::new(p.to_vec()).expect("stored vectors are finite"))
            .collect()
    }
}

impl ForwardIndex {
    pub fn new(dim: usize, normalized: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("index dimension must be positive"));
        }
        Ok(Self {
            dim,
            normalized,
            data: Vec::new(),
            docs: Vec::new(),
            by_id: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether stored vectors were L2-normalized at indexing time.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn num_vectors(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.by_id.contains_key(doc_id)
    }

    /// Document IDs in insertion order.
    pub fn doc_ids(&self) -> impl ExactSizeIterator<Item = &str> {
        self.docs.iter().map(|d| d.id.as_str())
    }

    /// Documents with their passages, in insertion order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, Passages<'_>)> {
        self.docs
            .iter()
            .map(|d| (d.id.as_str(), self.passages_of(d)))
    }

    fn passages_of(&self, d: &DocEntry) -> Passages<'_> {
        Passages {
            data: &self.data[d.start * self.dim..(d.start + d.len) * self.dim],
            dim: self.dim,
        }
    }

    pub fn lookup(&self, doc_id: &str) -> Result<Passages<'_>> {
        let &i = self
            .by_id
            .get(doc_id)
            .ok_or_else(|| Error::MissingDocument(doc_id.to_owned()))?;
        Ok(self.passages_of(&self.docs[i]))
    }

    /// maxP score: the best passage dot product for `doc_id`.
    pub fn score_maxp(&self, query: &[f32], doc_id: &str) -> Result<f64> {
        if query.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let passages = self.lookup(doc_id)?;
        Ok(passages
            .iter()
            .map(|p| vector::dot_unchecked(query, p))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    fn validate_passages(&self, doc_id: &str, passages: &[DenseVector]) -> Result<()> {
        if passages.is_empty() {
            return Err(Error::domain(format!("document {doc_id} has no passages")));
        }
        if doc_id.len() > usize::from(u16::MAX) {
            return Err(Error::domain(format!(
                "document id longer than {} bytes",
                u16::MAX
            )));
        }
        for p in passages {
            if p.dim() != self.dim {
                return Err(Error::Dimension {
                    expected: self.dim,
                    actual: p.dim(),
                });
            }
        }
        Ok(())
    }

    /// Appends one document. Existing entries are left untouched.
    pub fn insert(&mut self, doc_id: &str, passages: &[DenseVector]) -> Result<()> {
        if self.by_id.contains_key(doc_id) {
            return Err(Error::DuplicateDocument(doc_id.to_owned()));
        }
        self.validate_passages(doc_id, passages)?;
        self.push_unchecked(doc_id, passages.iter().map(|p| p.as_slice()));
        Ok(())
    }

    /// Adds a batch of documents. The batch is validated as a whole first, so
    /// on error the index is unchanged.
    pub fn add_documents<S: AsRef<str>>(&mut self, batch: &[(S, Vec<DenseVector>)]) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (id, passages) in batch {
            let id = id.as_ref();
            if self.by_id.contains_key(id) || !seen.insert(id) {
                return Err(Error::DuplicateDocument(id.to_owned()));
            }
            self.validate_passages(id, passages)?;
        }
        for (id, passages) in batch {
            self.push_unchecked(id.as_ref(), passages.iter().map(|p| p.as_slice()));
        }
        Ok(())
    }

    pub(crate) fn push_unchecked<'v>(
        &mut self,
        doc_id: &str,
        passages: impl IntoIterator<Item = &'v [f32]>,
    ) {
        let start = self.num_vectors();
        for p in passages {
            debug_assert_eq!(p.len(), self.dim);
            self.data.extend_from_slice(p);
        }
        let len = self.num_vectors() - start;
        self.by_id.insert(doc_id.to_owned(), self.docs.len());
        self.docs.push(DocEntry {
            id: doc_id.to_owned(),
            start,
            len,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f32]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    fn sample() -> ForwardIndex {
        let mut idx = ForwardIndex::new(2, false).unwrap();
        idx.add_documents(&[
            ("d1", vec![v(&[1.0, 2.0])]),
            ("d2", vec![v(&[0.2, 0.0]), v(&[0.7, 0.0]), v(&[0.5, 0.0])]),
        ])
        .unwrap();
        idx
    }

    #[test]
    fn lookup_round_trips_and_keeps_order() {
        let idx = sample();
        assert_eq!(idx.lookup("d1").unwrap().to_vectors(), vec![v(&[1.0, 2.0])]);
        assert_eq!(
            idx.lookup("d2").unwrap().to_vectors(),
            vec![v(&[0.2, 0.0]), v(&[0.7, 0.0]), v(&[0.5, 0.0])]
        );
        assert!(matches!(idx.lookup("absent"), Err(Error::MissingDocument(id)) if id == "absent"));
        assert_eq!(idx.num_docs(), 2);
        assert_eq!(idx.num_vectors(), 4);
    }

    #[test]
    fn maxp_takes_best_passage() {
        let idx = sample();
        let q = [3.0, -1.0];
        assert_eq!(idx.score_maxp(&q, "d1").unwrap(), 1.0);
        assert!((idx.score_maxp(&[1.0, 0.0], "d2").unwrap() - 0.7).abs() < 1e-7);

        let mut basis = ForwardIndex::new(2, true).unwrap();
        basis
            .insert("b", &[v(&[1.0, 0.0]), v(&[0.0, 1.0])])
            .unwrap();
        assert_eq!(basis.score_maxp(&[0.0, 1.0], "b").unwrap(), 1.0);

        assert!(matches!(
            idx.score_maxp(&[1.0], "d1"),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            idx.score_maxp(&q, "nope"),
            Err(Error::MissingDocument(_))
        ));
    }

    #[test]
    fn add_documents_errors_leave_index_untouched() {
        let mut idx = sample();
        let before = idx.clone();
        assert!(matches!(
            idx.add_documents(&[("d3", vec![v(&[1.0, 1.0])]), ("d1", vec![v(&[1.0, 1.0])])]),
            Err(Error::DuplicateDocument(id)) if id == "d1"
        ));
        assert!(matches!(
            idx.add_documents(&[("d3", vec![v(&[1.0, 1.0, 1.0])])]),
            Err(Error::Dimension {
                expected: 2,
                actual: 3
            })
        ));
        assert!(idx.add_documents(&[("d3", vec![])]).is_err());
        assert!(matches!(
            idx.add_documents(&[("d4", vec![v(&[1.0, 1.0])]), ("d4", vec![v(&[1.0, 1.0])])]),
            Err(Error::DuplicateDocument(_))
        ));
        assert_eq!(idx, before);

        idx.add_documents(&[("d5", vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])])])
            .unwrap();
        assert_eq!(
            idx.lookup("d5").unwrap().to_vectors(),
            vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]
        );
        assert_eq!(idx.lookup("d1").unwrap().to_vectors(), vec![v(&[1.0, 2.0])]);
    }

    #[test]
    fn empty_index_grows() {
        let mut idx = ForwardIndex::new(2, false).unwrap();
        assert!(idx.is_empty());
        idx.add_documents(&[("d1", vec![v(&[1.0, 0.0])])]).unwrap();
        assert_eq!(idx.num_docs(), 1);
        assert!(ForwardIndex::new(0, false).is_err());
    }
}
