//! Embedding cache file.
//!
//! Little-endian layout:
//!
//! ```text
//! magic   b"VGEC"
//! version u32 = 1
//! dims    u32
//! count   u64
//! count × { id_len u16, id utf-8 bytes, dims × f64 }
//! ```
//!
//! Records are written sorted by id so identical caches produce identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VGEC";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingCache {
    dims: Option<usize>,
    records: BTreeMap<String, Vec<f64>>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::format("embedding cache", "truncated file"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dims(&self) -> Option<usize> {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.records.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.records.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Stores `vector`; the first insert fixes the width.
    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        match self.dims {
            Some(d) if d != vector.len() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: vector.len(),
                })
            }
            None => self.dims = Some(vector.len()),
            _ => {}
        }
        let id = id.into();
        if id.len() > u16::MAX as usize {
            return Err(Error::format(
                "embedding cache",
                "sample id longer than 65535 bytes",
            ));
        }
        self.records.insert(id, vector);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dims = self.dims.unwrap_or(0);
        let mut out = Vec::with_capacity(20 + self.records.len() * (66 + 8 * dims));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(dims as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for (id, v) in &self.records {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format("embedding cache", "bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(
                "embedding cache",
                format!("unsupported version {version}"),
            ));
        }
        let dims = r.u32()? as usize;
        let count = r.u64()?;
        let mut cache = Self::new();
        if count > 0 {
            cache.dims = Some(dims);
        }
        for _ in 0..count {
            let len = r.u16()? as usize;
            let id = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::format("embedding cache", "sample id is not UTF-8"))?
                .to_string();
            let v = (0..dims).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            cache.records.insert(id, v);
        }
        if r.pos != buf.len() {
            return Err(Error::format("embedding cache", "trailing bytes"));
        }
        Ok(cache)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// `sample_id,v0,v1,...` with a header row, for inspection.
    pub fn to_csv(&self) -> String {
        let dims = self.dims.unwrap_or(0);
        let mut out = String::from("sample_id");
        for k in 0..dims {
            out.push_str(&format!(",v{k}"));
        }
        out.push('\n');
        for (id, v) in &self.records {
            out.push_str(id);
            for x in v {
                out.push_str(&format!(",{x:?}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut c = EmbeddingCache::new();
        c.insert("b", vec![0.1, -2.5, f64::MIN_POSITIVE]).unwrap();
        c.insert("a", vec![1.0, 2.0, 3.0]).unwrap();
        let back = EmbeddingCache::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.get("b").unwrap()[2], f64::MIN_POSITIVE);
    }

    #[test]
    fn width_is_enforced() {
        let mut c = EmbeddingCache::new();
        c.insert("a", vec![1.0]).unwrap();
        assert!(matches!(
            c.insert("b", vec![1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_corrupt_input() {
        let mut c = EmbeddingCache::new();
        c.insert("a", vec![1.0]).unwrap();
        let bytes = c.to_bytes();
        assert!(EmbeddingCache::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(EmbeddingCache::from_bytes(b"NOPE").is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut c = EmbeddingCache::new();
        c.insert("x", vec![0.5, 1.0]).unwrap();
        assert_eq!(c.to_csv(), "sample_id,v0,v1\nx,0.5,1.0\n");
    }
}
