//! Shared helpers for the line-oriented text formats.

use crate::error::{Error, Result};
use crate::vector::DenseVector;

/// Non-blank lines paired with the byte offset where each starts.
pub(crate) struct Lines<'a> {
    rest: &'a str,
    offset: u64,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(content: &'a str) -> Self {
        Self {
            rest: content,
            offset: 0,
        }
    }
}

impl<'a> Iterator for Lines<'a> {
    type Item = (u64, &'a str);

    fn next(&mut self) -> Option<Self::Item> {
        while !self.rest.is_empty() {
            let (line, consumed) = match self.rest.find('\n') {
                Some(i) => (&self.rest[..i], i + 1),
                None => (self.rest, self.rest.len()),
            };
            let start = self.offset;
            self.rest = &self.rest[consumed..];
            self.offset += consumed as u64;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if !line.trim().is_empty() {
                return Some((start, line));
            }
        }
        None
    }
}

pub(crate) fn parse_vector(field: &str, offset: u64) -> Result<DenseVector> {
    let values = field
        .split_ascii_whitespace()
        .map(|t| {
            t.parse::<f32>()
                .map_err(|_| Error::format(offset, format!("bad float {t:?}")))
        })
        .collect::<Result<Vec<f32>>>()?;
    DenseVector::new(values).map_err(|e| Error::format(offset, e.to_string()))
}

pub(crate) fn check_dim(expected: &mut Option<usize>, dim: usize, offset: u64) -> Result<()> {
    match *expected {
        None => *expected = Some(dim),
        Some(d) if d != dim => {
            return Err(Error::format(
                offset,
                format!("vector has dimension {dim}, expected {d}"),
            ))
        }
        _ => {}
    }
    Ok(())
}

/// Space-separated shortest round-trip representation of each component.
pub(crate) fn format_vector(v: &[f32]) -> String {
    let mut out = String::with_capacity(v.len() * 10);
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&x.to_string());
    }
    out
}
