//! EMB1: a tiny little-endian container for labelled `f32` embedding rows.
//!
//! ```text
//! "EMB1" | u32 version (=1) | u32 count | u32 dim
//! count × (u16 byte length, UTF-8 id)
//! count × dim × f32, row-major
//! ```

use std::fs;
use std::path::Path;

use super::CorpusError;
use crate::matrix::Embeddings;

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u32 = 1;

/// Serializes ids and rows into EMB1 bytes.
pub fn encode(ids: &[String], matrix: &Embeddings) -> Result<Vec<u8>, CorpusError> {
    if ids.len() != matrix.rows() {
        return Err(CorpusError::LengthMismatch { ids: ids.len(), rows: matrix.rows() });
    }
    let count = u32::try_from(ids.len()).map_err(|_| CorpusError::Format("too many rows".into()))?;
    let dim = u32::try_from(matrix.dim()).map_err(|_| CorpusError::Format("dimension too large".into()))?;
    let mut out = Vec::with_capacity(16 + ids.len() * 8 + matrix.as_flat().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for id in ids {
        let len = u16::try_from(id.len())
            .map_err(|_| CorpusError::Format(format!("id longer than 65535 bytes: {}…", id.chars().take(32).collect::<String>())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    for v in matrix.as_flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CorpusError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(
            CorpusError::Truncated { expected: self.pos.saturating_add(n), actual: self.buf.len() },
        )?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, CorpusError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CorpusError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parses EMB1 bytes.
pub fn decode(bytes: &[u8]) -> Result<(Vec<String>, Embeddings), CorpusError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CorpusError::Format("bad magic, expected EMB1".into()));
    }
    let mut cur = Cursor { buf: bytes, pos: 4 };
    let version = cur.u32()?;
    if version != VERSION {
        return Err(CorpusError::Format(format!("unsupported EMB1 version {version}")));
    }
    let count = cur.u32()? as usize;
    let dim = cur.u32()? as usize;
    let mut ids = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = cur.u16()? as usize;
        let raw = cur.take(len)?;
        let id = std::str::from_utf8(raw)
            .map_err(|_| CorpusError::Format("id is not valid UTF-8".into()))?;
        ids.push(id.to_owned());
    }
    let n_values = count
        .checked_mul(dim)
        .ok_or_else(|| CorpusError::Format("count × dim overflows".into()))?;
    let payload = cur.take(n_values.checked_mul(4).ok_or_else(|| CorpusError::Format("payload overflows".into()))?)?;
    if cur.pos != bytes.len() {
        return Err(CorpusError::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let matrix = Embeddings::from_flat(count, dim, data).expect("payload sized from header");
    Ok((ids, matrix))
}

pub fn write_embeddings(path: &Path, ids: &[String], matrix: &Embeddings) -> Result<(), CorpusError> {
    let bytes = encode(ids, matrix)?;
    fs::write(path, bytes).map_err(|e| CorpusError::io(path, e))
}

pub fn read_embeddings(path: &Path) -> Result<(Vec<String>, Embeddings), CorpusError> {
    let bytes = fs::read(path).map_err(|e| CorpusError::io(path, e))?;
    decode(&bytes)
}
