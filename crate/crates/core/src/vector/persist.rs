//! Binary index file.
//!
//! ```text
//! "PVIX" | version u16 | dim u32 | count u32 | fingerprint (u32 len + UTF-8)
//! then per entry: id (u32 len + UTF-8) | dim x f32
//! ```
//! All integers and floats little-endian.

use std::path::Path;

use super::index::VectorIndex;
use super::IndexError;

pub const MAGIC: &[u8; 4] = b"PVIX";
pub const FORMAT_VERSION: u16 = 1;

pub fn index_to_bytes(index: &VectorIndex) -> Vec<u8> {
    let mut out = Vec::with_capacity(18 + index.len() * (index.dim() * 4 + 24));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(index.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(index.len() as u32).to_le_bytes());
    put_str(&mut out, index.fingerprint());
    for (id, v) in index.entries() {
        put_str(&mut out, id);
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| IndexError::CorruptIndex(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, IndexError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self) -> Result<String, IndexError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| IndexError::CorruptIndex("invalid UTF-8 string".into()))
    }
}

pub fn index_from_bytes(buf: &[u8]) -> Result<VectorIndex, IndexError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(IndexError::CorruptIndex("bad magic".into()));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(IndexError::CorruptIndex(format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let count = r.u32()? as usize;
    let fingerprint = r.string()?;
    let mut ids = Vec::with_capacity(count.min(1 << 20));
    let mut data = Vec::with_capacity(count.saturating_mul(dim).min(1 << 24));
    for _ in 0..count {
        let id = r.string()?;
        if ids.contains(&id) {
            return Err(IndexError::CorruptIndex(format!("duplicate id `{id}`")));
        }
        ids.push(id);
        let raw = r.take(dim.checked_mul(4).ok_or_else(|| IndexError::CorruptIndex("dim overflow".into()))?)?;
        data.extend(raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])));
    }
    if r.pos != buf.len() {
        return Err(IndexError::CorruptIndex(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(VectorIndex::from_parts(dim, fingerprint, ids, data))
}

pub fn save_index(index: &VectorIndex, path: &Path) -> Result<(), IndexError> {
    std::fs::write(path, index_to_bytes(index)).map_err(|e| IndexError::Io(format!("{}: {e}", path.display())))
}

pub fn load_index(path: &Path) -> Result<VectorIndex, IndexError> {
    let bytes = std::fs::read(path).map_err(|e| IndexError::Io(format!("{}: {e}", path.display())))?;
    index_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VectorIndex {
        let mut i = VectorIndex::new(3, "stub/3");
        i.insert("a", &[1.0, 2.0, 2.0]).unwrap();
        i.insert("b", &[0.0, 0.0, 0.0]).unwrap();
        i
    }

    #[test]
    fn header_layout() {
        let b = index_to_bytes(&sample());
        assert_eq!(&b[0..4], b"PVIX");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(u32::from_le_bytes([b[6], b[7], b[8], b[9]]), 3);
        assert_eq!(u32::from_le_bytes([b[10], b[11], b[12], b[13]]), 2);
        assert_eq!(u32::from_le_bytes([b[14], b[15], b[16], b[17]]), 6);
        assert_eq!(&b[18..24], b"stub/3");
        assert_eq!(b.len(), 24 + 2 * (4 + 1 + 12));
    }

    #[test]
    fn round_trip_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.bin");
        save_index(&sample(), &p).unwrap();
        assert_eq!(load_index(&p).unwrap(), sample());
    }

    #[test]
    fn corrupt_inputs() {
        let good = index_to_bytes(&sample());
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        let mut bad_version = good.clone();
        bad_version[4] = 9;
        let mut trailing = good.clone();
        trailing.push(0);
        for b in [bad_magic, bad_version, trailing, good[..good.len() - 1].to_vec(), vec![]] {
            assert!(matches!(index_from_bytes(&b), Err(IndexError::CorruptIndex(_))));
        }
        for cut in 0..good.len() {
            assert!(index_from_bytes(&good[..cut]).is_err());
        }
    }
}
