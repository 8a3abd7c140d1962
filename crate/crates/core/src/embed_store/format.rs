//! Little-endian layout:
//!
//! ```text
//! "SGEM" | version: u32 | dim: u32 | count: u64
//! count x ( key_len: u16 | key: utf-8 | dim x f32 )
//! ```
//!
//! Text fallback: one `kind:id<TAB>c1 c2 ...` record per line.

use super::{EmbeddingStore, EntityKey, StoreError};

pub const MAGIC: [u8; 4] = *b"SGEM";
pub const VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], StoreError> {
        if self.bytes.len() - self.pos < n {
            return Err(StoreError::Truncated(format!(
                "{what}: need {n} bytes at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub(super) fn decode_binary(bytes: &[u8]) -> Result<EmbeddingStore, StoreError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(StoreError::BadMagic(magic));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let dim = cur.u32("dim")? as usize;
    let count = cur.u64("record count")?;
    let mut store = EmbeddingStore::new(dim)?;
    for record in 0..count {
        let key_len = cur.u16("key length")? as usize;
        let key_bytes = cur.take(key_len, "key")?;
        let key_text = std::str::from_utf8(key_bytes)
            .map_err(|e| StoreError::BadKey(format!("record {record}: {e}")))?;
        let key: EntityKey = key_text.parse()?;
        let remaining = bytes.len() - cur.pos;
        if remaining < dim * 4 {
            return Err(StoreError::DimMismatch {
                key: key_text.to_string(),
                expected: dim,
                found: remaining / 4,
            });
        }
        let payload = cur.take(dim * 4, "components")?;
        let vector = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        store.insert(key, vector)?;
    }
    if cur.pos != bytes.len() {
        return Err(StoreError::Truncated(format!(
            "{} trailing bytes after {count} records",
            bytes.len() - cur.pos
        )));
    }
    Ok(store)
}

pub(super) fn encode_binary(store: &EmbeddingStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + store.len() * (store.dim() * 4 + 32));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(store.len() as u64).to_le_bytes());
    for (key, vector) in store.iter() {
        let key = key.to_string();
        let len = u16::try_from(key.len()).expect("key longer than 65535 bytes");
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(key.as_bytes());
        for x in vector {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub(super) fn decode_text(text: &str) -> Result<EmbeddingStore, StoreError> {
    let mut store: Option<EmbeddingStore> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (key_text, rest) = line.split_once('\t').ok_or_else(|| StoreError::Text {
            line: line_no,
            message: "missing TAB between key and components".into(),
        })?;
        let key: EntityKey = key_text.trim().parse()?;
        let vector = rest
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f32>().map_err(|e| StoreError::Text {
                    line: line_no,
                    message: format!("component `{tok}`: {e}"),
                })
            })
            .collect::<Result<Vec<f32>, _>>()?;
        let store = match store.as_mut() {
            Some(s) => s,
            None => store.insert(EmbeddingStore::new(vector.len())?),
        };
        store.insert(key, vector)?;
    }
    store.ok_or_else(|| StoreError::Text {
        line: 0,
        message: "no records".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(dim: u32, count: u64) -> Vec<u8> {
        let mut b = MAGIC.to_vec();
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&dim.to_le_bytes());
        b.extend_from_slice(&count.to_le_bytes());
        b
    }

    fn record(b: &mut Vec<u8>, key: &str, comps: &[f32]) {
        b.extend_from_slice(&(key.len() as u16).to_le_bytes());
        b.extend_from_slice(key.as_bytes());
        for c in comps {
            b.extend_from_slice(&c.to_le_bytes());
        }
    }

    #[test]
    fn three_records_dim_four() {
        let mut b = header(4, 3);
        record(&mut b, "abstract:p1", &[1.0, 2.0, 3.0, 4.0]);
        record(&mut b, "figure:p1/f1", &[0.0; 4]);
        record(&mut b, "caption:p1/f1", &[-1.0, 0.5, 0.25, 8.0]);
        let s = decode_binary(&b).unwrap();
        assert_eq!((s.len(), s.dim()), (3, 4));
        assert_eq!(
            s.get(&"abstract:p1".parse().unwrap()).unwrap(),
            &[1.0, 2.0, 3.0, 4.0]
        );
    }

    #[test]
    fn non_finite_component_names_key() {
        let mut b = header(2, 1);
        record(&mut b, "figure:p9/f3", &[1.0, f32::INFINITY]);
        let err = decode_binary(&b).unwrap_err();
        assert!(matches!(err, StoreError::NonFinite { ref key, .. } if key == "figure:p9/f3"));
    }

    #[test]
    fn duplicate_key_rejected() {
        let mut b = header(2, 2);
        record(&mut b, "abstract:p1", &[1.0, 0.0]);
        record(&mut b, "abstract:p1", &[0.0, 1.0]);
        assert!(matches!(
            decode_binary(&b).unwrap_err(),
            StoreError::DuplicateKey(_)
        ));
    }

    #[test]
    fn short_payload_is_dim_mismatch() {
        let mut b = header(4, 1);
        record(&mut b, "abstract:p1", &[1.0, 0.0]);
        assert!(matches!(
            decode_binary(&b).unwrap_err(),
            StoreError::DimMismatch {
                expected: 4,
                found: 2,
                ..
            }
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut b = header(1, 1);
        record(&mut b, "abstract:p1", &[1.0]);
        b.push(0);
        assert!(matches!(
            decode_binary(&b).unwrap_err(),
            StoreError::Truncated(_)
        ));
    }

    #[test]
    fn wrong_version_and_magic() {
        let mut b = header(1, 0);
        b[4] = 2;
        assert!(matches!(
            decode_binary(&b).unwrap_err(),
            StoreError::UnsupportedVersion(2)
        ));
        let mut b = header(1, 0);
        b[0] = b'X';
        assert!(matches!(
            decode_binary(&b).unwrap_err(),
            StoreError::BadMagic(_)
        ));
    }

    #[test]
    fn text_fallback() {
        let s = EmbeddingStore::from_bytes(b"abstract:p1\t1 2 3\nfigure:p1/f1\t0.5 -0.5 1e-3\n\n")
            .unwrap();
        assert_eq!((s.len(), s.dim()), (2, 3));
        let err = EmbeddingStore::from_bytes(b"abstract:p1\t1 2 3\nfigure:p1/f1\t0.5 -0.5\n")
            .unwrap_err();
        assert!(matches!(
            err,
            StoreError::DimMismatch {
                expected: 3,
                found: 2,
                ..
            }
        ));
        let err = EmbeddingStore::from_bytes(b"abstract:p1\t1 nan 3\n").unwrap_err();
        assert!(matches!(err, StoreError::NonFinite { .. }));
    }
}
