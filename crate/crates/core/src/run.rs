//! Ranked runs and the TREC run file format
//! (`query_id Q0 doc_id rank score tag`).

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::Lines;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// Per-query rankings, each sorted by descending score with unique doc IDs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedRun {
    tag: String,
    queries: BTreeMap<String, Vec<ScoredDoc>>,
}

impl RankedRun {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            queries: BTreeMap::new(),
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn set_tag(&mut self, tag: impl Into<String>) {
        self.tag = tag.into();
    }

    /// Adds a ranking that must already be sorted by non-increasing score.
    pub fn insert(&mut self, query_id: impl Into<String>, docs: Vec<ScoredDoc>) -> Result<()> {
        let query_id = query_id.into();
        if docs
            .windows(2)
            .any(|w| w[0].score < w[1].score || w[0].score.is_nan() || w[1].score.is_nan())
        {
            return Err(Error::domain(format!(
                "ranking for query {query_id} is not sorted by descending score"
            )));
        }
        let mut seen = HashSet::with_capacity(docs.len());
        if let Some(d) = docs.iter().find(|d| !seen.insert(d.doc_id.as_str())) {
            return Err(Error::domain(format!(
                "document {} listed twice for query {query_id}",
                d.doc_id
            )));
        }
        self.queries.insert(query_id, docs);
        Ok(())
    }

    /// Adds a ranking in arbitrary order; it is stably sorted by score.
    pub fn insert_unsorted(
        &mut self,
        query_id: impl Into<String>,
        mut docs: Vec<ScoredDoc>,
    ) -> Result<()> {
        docs.sort_by(|a, b| b.score.total_cmp(&a.score));
        self.insert(query_id, docs)
    }

    pub fn get(&self, query_id: &str) -> Option<&[ScoredDoc]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[ScoredDoc])> {
        self.queries.iter().map(|(q, d)| (q.as_str(), d.as_slice()))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Keeps at most `depth` documents per query.
    pub fn truncated(&self, depth: usize) -> Self {
        Self {
            tag: self.tag.clone(),
            queries: self
                .queries
                .iter()
                .map(|(q, d)| (q.clone(), d[..d.len().min(depth)].to_vec()))
                .collect(),
        }
    }
}

/// Shortest round-trip decimal, padded with zeros to at least six
/// significant digits.
pub fn format_score(score: f64) -> String {
    let mut s = score.to_string();
    let digits = s
        .bytes()
        .filter(u8::is_ascii_digit)
        .skip_while(|&b| b == b'0')
        .count()
        .max(if score == 0.0 { 1 } else { 0 });
    if digits < 6 {
        if !s.contains('.') {
            s.push('.');
        }
        s.extend(std::iter::repeat_n('0', 6 - digits));
    }
    s
}

pub fn format_run(run: &RankedRun) -> String {
    let mut out = String::new();
    for (qid, docs) in run.iter() {
        for (i, d) in docs.iter().enumerate() {
            let _ = writeln!(
                out,
                "{qid} Q0 {} {} {} {}",
                d.doc_id,
                i + 1,
                format_score(d.score),
                run.tag
            );
        }
    }
    out
}

/// Parses a TREC run. Within a query, entries are ordered by descending
/// score, then by ascending rank as written in the file. The tag of the first
/// line names the run.
pub fn parse_run(content: &str) -> Result<RankedRun> {
    let mut rows: BTreeMap<String, Vec<(f64, u64, String, u64)>> = BTreeMap::new();
    let mut tag = None;
    for (offset, line) in Lines::new(content) {
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        let [qid, _q0, doc_id, rank, score, run_tag] = fields[..] else {
            return Err(Error::format(
                offset,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        };
        let rank: u64 = rank
            .parse()
            .map_err(|_| Error::format(offset, format!("bad rank {rank:?}")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::format(offset, format!("bad score {score:?}")))?;
        tag.get_or_insert_with(|| run_tag.to_owned());
        rows.entry(qid.to_owned())
            .or_default()
            .push((score, rank, doc_id.to_owned(), offset));
    }
    let mut run = RankedRun::new(tag.unwrap_or_default());
    for (qid, mut entries) in rows {
        entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut seen = HashSet::new();
        for (_, _, doc, offset) in &entries {
            if !seen.insert(doc.as_str()) {
                return Err(Error::format(
                    *offset,
                    format!("document {doc} listed twice for query {qid}"),
                ));
            }
        }
        let docs = entries
            .into_iter()
            .map(|(score, _, doc_id, _)| ScoredDoc { doc_id, score })
            .collect();
        run.queries.insert(qid, docs);
    }
    Ok(run)
}

pub fn read_run(path: impl AsRef<Path>) -> Result<RankedRun> {
    parse_run(&fs::read_to_string(path)?)
}

pub fn write_run(run: &RankedRun, path: impl AsRef<Path>) -> Result<()> {
    crate::storage::write_atomic(path.as_ref(), format_run(run).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(0.5), "0.500000");
        assert_eq!(format_score(3.0), "3.00000");
        assert_eq!(format_score(0.0), "0.00000");
        assert_eq!(format_score(-1.25), "-1.25000");
        assert_eq!(format_score(1200.0), "1200.00");
        assert_eq!(format_score(0.465), "0.465000");
        assert_eq!(format_score(0.1234567891), "0.1234567891");
        assert_eq!(format_score(0.001), "0.00100000");
    }

    #[test]
    fn parse_orders_by_score_then_rank() {
        let text = "q1 Q0 b 2 0.5 bm25\nq1 Q0 a 1 0.9 bm25\nq1 Q0 c 3 0.5 bm25\nq0 Q0 x 1 1 bm25\n";
        let run = parse_run(text).unwrap();
        assert_eq!(run.tag(), "bm25");
        let ids: Vec<_> = run
            .get("q1")
            .unwrap()
            .iter()
            .map(|d| d.doc_id.as_str())
            .collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(run.query_ids().collect::<Vec<_>>(), ["q0", "q1"]);
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(matches!(
            parse_run("q1 Q0 a 1 0.5\n"),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(parse_run("q1 Q0 a x 0.5 t\n").is_err());
        assert!(parse_run("q1 Q0 a 1 nan t\n").is_err());
        assert!(matches!(
            parse_run("q1 Q0 a 1 0.5 t\nq1 Q0 a 2 0.4 t\n"),
            Err(Error::Format { offset: 16, .. })
        ));
        assert!(parse_run("").unwrap().is_empty());
    }

    #[test]
    fn insert_validates_ordering() {
        let mut run = RankedRun::new("t");
        assert!(run
            .insert(
                "q",
                vec![ScoredDoc::new("a", 0.1), ScoredDoc::new("b", 0.2)]
            )
            .is_err());
        assert!(run
            .insert(
                "q",
                vec![ScoredDoc::new("a", 0.2), ScoredDoc::new("a", 0.1)]
            )
            .is_err());
        run.insert_unsorted(
            "q",
            vec![ScoredDoc::new("a", 0.1), ScoredDoc::new("b", 0.2)],
        )
        .unwrap();
        assert_eq!(run.get("q").unwrap()[0].doc_id, "b");
    }

    fn arb_run() -> impl Strategy<Value = RankedRun> {
        let query = prop::collection::vec(-1e6f64..1e6, 0..20);
        prop::collection::btree_map("[a-z0-9]{1,6}", query, 0..5).prop_map(|m| {
            let mut run = RankedRun::new("tag");
            for (q, scores) in m {
                let docs = scores
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| ScoredDoc::new(format!("d{i}"), s))
                    .collect();
                run.insert_unsorted(q, docs).unwrap();
            }
            run
        })
    }

    proptest! {
        #[test]
        fn emit_parse_round_trip(run in arb_run()) {
            let back = parse_run(&format_run(&run)).unwrap();
            // queries with no documents have no lines
            let nonempty: Vec<_> = run.iter().filter(|(_, d)| !d.is_empty()).collect();
            prop_assert_eq!(back.iter().collect::<Vec<_>>(), nonempty);
        }
    }
}
