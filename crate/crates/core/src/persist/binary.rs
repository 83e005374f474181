use std::io::Write;
use std::path::Path;

use crate::error::{HkdError, Result};

/// Largest tensor payload accepted by the readers and writers.
pub const MAX_PAYLOAD_BYTES: u64 = 4 << 30;

pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self { buf: Vec::new() }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32s(&mut self, vs: &[f32]) {
        self.buf.reserve(4 * vs.len());
        for &v in vs {
            self.f32(v);
        }
    }

    /// Length-prefixed UTF-8.
    pub fn str(&mut self, s: &str) -> Result<()> {
        self.u32(to_u32(s.len(), "string length")?);
        self.bytes(s.as_bytes());
        Ok(())
    }
}

pub(crate) fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| HkdError::SizeLimit(format!("{what} {v} does not fit in u32")))
}

pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn corrupt(&self, offset: u64, detail: impl Into<String>) -> HkdError {
        HkdError::Corrupt { offset, detail: detail.into() }
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(self.corrupt(
                self.offset(),
                format!("truncated {what}: need {n} bytes, {} remain", self.remaining()),
            ));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub fn f32s_into(&mut self, n: usize, what: &str, out: &mut Vec<f32>) -> Result<()> {
        let raw = self.take(4 * n, what)?;
        out.extend(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))));
        Ok(())
    }

    pub fn str(&mut self, what: &str) -> Result<String> {
        let at = self.offset();
        let len = self.u32(what)? as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.corrupt(at, format!("{what} is not UTF-8")))
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let found = self.take(4, "magic")?;
        if found != expected {
            return Err(HkdError::BadMagic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    pub fn version(&mut self, supported: u32) -> Result<u32> {
        let v = self.u32("version")?;
        if v == 0 || v > supported {
            return Err(HkdError::UnsupportedVersion { found: v, supported });
        }
        Ok(v)
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.corrupt(self.offset(), format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

/// `4 * prod(dims)` with overflow and size-limit checks.
pub(crate) fn payload_bytes(dims: &[u64], what: &str) -> Result<u64> {
    let bytes = dims
        .iter()
        .try_fold(4u64, |acc, &d| acc.checked_mul(d))
        .filter(|&b| b <= MAX_PAYLOAD_BYTES)
        .ok_or_else(|| {
            HkdError::SizeLimit(format!("{what} with dims {dims:?} exceeds the {MAX_PAYLOAD_BYTES}-byte payload limit"))
        })?;
    Ok(bytes)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| HkdError::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_limits() {
        assert_eq!(payload_bytes(&[2, 3], "t").unwrap(), 24);
        assert!(matches!(payload_bytes(&[1 << 20, 1 << 20], "t"), Err(HkdError::SizeLimit(_))));
        assert!(matches!(payload_bytes(&[u64::MAX, 2], "t"), Err(HkdError::SizeLimit(_))));
    }

    #[test]
    fn truncation_reports_offset() {
        let mut r = ByteReader::new(&[1, 0, 0, 0, 9]);
        assert_eq!(r.u32("a").unwrap(), 1);
        match r.u32("b") {
            Err(HkdError::Corrupt { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
    }
}
