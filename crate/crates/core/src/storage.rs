//! On-disk formats for the forward index.
//!
//! Binary FFIDX layout, little-endian throughout:
//!
//! ```text
//! magic    b"FFIDX" + version byte (0x01)
//! u32      dim
//! u8       flags (bit 0: vectors are L2-normalized)
//! u64      document count
//! per document:
//!   u16    id length in bytes, then the UTF-8 id
//!   u32    passage count
//!   f32 × passage count × dim
//! ```
//!
//! The text interchange format has one passage per line:
//! `doc_id<TAB>passage_index<TAB>space-separated floats`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::index::ForwardIndex;
use crate::text::{self, Lines};
use crate::vector::DenseVector;

const MAGIC: &[u8; 5] = b"FFIDX";
pub const FORMAT_VERSION: u8 = 1;
const FLAG_NORMALIZED: u8 = 0b1;

pub fn encode(index: &ForwardIndex) -> Vec<u8> {
    let mut buf = Vec::with_capacity(32 + index.num_vectors() * index.dim() * 4);
    buf.extend_from_slice(MAGIC);
    buf.push(FORMAT_VERSION);
    buf.extend_from_slice(&(index.dim() as u32).to_le_bytes());
    buf.push(if index.is_normalized() {
        FLAG_NORMALIZED
    } else {
        0
    });
    buf.extend_from_slice(&(index.num_docs() as u64).to_le_bytes());
    for (id, passages) in index.iter() {
        buf.extend_from_slice(&(id.len() as u16).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        buf.extend_from_slice(&(passages.len() as u32).to_le_bytes());
        for p in passages.iter() {
            for x in p {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.error(format!("truncated while reading {what}"))),
        }
    }

    fn error(&self, reason: impl Into<String>) -> Error {
        Error::format(self.pos as u64, reason)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8]) -> Result<ForwardIndex> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic, not an FFIDX file"));
    }
    let version = r.u8("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let dim = r.u32("dimension")? as usize;
    if dim == 0 {
        return Err(Error::format(6, "dimension is zero"));
    }
    let flags = r.u8("flags")?;
    if flags & !FLAG_NORMALIZED != 0 {
        return Err(Error::format(10, format!("unknown flag bits {flags:#04x}")));
    }
    let doc_count = r.u64("document count")?;
    let mut index = ForwardIndex::new(dim, flags & FLAG_NORMALIZED != 0)?;
    let mut rows: Vec<f32> = Vec::new();
    for _ in 0..doc_count {
        let id_start = r.pos as u64;
        let id_len = r.u16("document id length")? as usize;
        let id = std::str::from_utf8(r.take(id_len, "document id")?)
            .map_err(|_| Error::format(id_start + 2, "document id is not UTF-8"))?;
        if index.contains(id) {
            return Err(Error::format(id_start, format!("duplicate document {id}")));
        }
        let count = r.u32("passage count")? as usize;
        if count == 0 {
            return Err(r.error(format!("document {id} has no passages")));
        }
        let payload = count
            .checked_mul(dim * 4)
            .ok_or_else(|| r.error("passage payload size overflows"))?;
        let payload_start = r.pos;
        let bytes = r.take(payload, "passage vectors")?;
        rows.clear();
        for (i, chunk) in bytes.chunks_exact(4).enumerate() {
            let x = f32::from_le_bytes(chunk.try_into().unwrap());
            if !x.is_finite() {
                return Err(Error::format(
                    (payload_start + i * 4) as u64,
                    "non-finite vector component",
                ));
            }
            rows.push(x);
        }
        index.push_unchecked(id, rows.chunks_exact(dim));
    }
    if r.pos != buf.len() {
        return Err(r.error("trailing bytes after last document"));
    }
    Ok(index)
}

pub fn load(path: impl AsRef<Path>) -> Result<ForwardIndex> {
    decode(&fs::read(path)?)
}

/// Writes the index through a temporary file in the target directory and
/// renames it into place, so readers never observe a partial file.
pub fn save(index: &ForwardIndex, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode(index))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Groups `doc_id<TAB>passage_index<TAB>payload` lines by document.
/// Passages are ordered by their passage index within each document;
/// documents keep the order of their first appearance.
fn group_passages<T>(
    content: &str,
    mut parse: impl FnMut(&str, u64) -> Result<T>,
) -> Result<Vec<(String, Vec<T>)>> {
    let mut order: Vec<String> = Vec::new();
    let mut docs: HashMap<String, Vec<(u32, T)>> = HashMap::new();
    for (offset, line) in Lines::new(content) {
        let mut fields = line.splitn(3, '\t');
        let (Some(doc_id), Some(idx), Some(payload)) =
            (fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::format(
                offset,
                "expected doc_id<TAB>passage_index<TAB>payload",
            ));
        };
        if doc_id.is_empty() {
            return Err(Error::format(offset, "empty document id"));
        }
        let idx: u32 = idx
            .trim()
            .parse()
            .map_err(|_| Error::format(offset, format!("bad passage index {idx:?}")))?;
        let item = parse(payload, offset)?;
        let entry = docs.entry(doc_id.to_owned()).or_insert_with(|| {
            order.push(doc_id.to_owned());
            Vec::new()
        });
        if entry.iter().any(|(i, _)| *i == idx) {
            return Err(Error::format(
                offset,
                format!("duplicate passage {idx} for document {doc_id}"),
            ));
        }
        entry.push((idx, item));
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let mut passages = docs.remove(&id).unwrap();
            passages.sort_by_key(|(i, _)| *i);
            (id, passages.into_iter().map(|(_, v)| v).collect())
        })
        .collect())
}

/// Parses the passage-vector interchange format. All vectors must share one
/// dimension.
pub fn parse_passage_vectors(content: &str) -> Result<Vec<(String, Vec<DenseVector>)>> {
    let mut dim = None;
    group_passages(content, |field, offset| {
        if field.contains('\t') {
            return Err(Error::format(
                offset,
                "expected doc_id<TAB>passage_index<TAB>vector",
            ));
        }
        let vector = text::parse_vector(field, offset)?;
        text::check_dim(&mut dim, vector.dim(), offset)?;
        Ok(vector)
    })
}

/// Parses `doc_id<TAB>passage_index<TAB>text` lines.
pub fn parse_passage_texts(content: &str) -> Result<Vec<(String, Vec<String>)>> {
    group_passages(content, |field, _| Ok(field.to_owned()))
}

pub fn read_passage_texts(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<String>)>> {
    parse_passage_texts(&fs::read_to_string(path)?)
}

pub fn read_passage_vectors(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<DenseVector>)>> {
    parse_passage_vectors(&fs::read_to_string(path)?)
}

/// Inverse of [`parse_passage_vectors`] for a whole index.
pub fn format_passage_vectors(index: &ForwardIndex) -> String {
    let mut out = String::new();
    for (id, passages) in index.iter() {
        for (i, p) in passages.iter().enumerate() {
            out.push_str(&format!("{id}\t{i}\t{}\n", text::format_vector(p)));
        }
    }
    out
}
