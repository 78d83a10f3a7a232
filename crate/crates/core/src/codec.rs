//! Little-endian binary container primitives.
//!
//! Every artifact file starts with four magic bytes and a `u32` format
//! version; the rest is a sequence of fixed-width integers, length-prefixed
//! UTF-8 strings and length-prefixed `f32` blobs. The exact layouts are
//! documented next to each artifact's `to_bytes`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::FormatError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4]) -> Self {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u32(FORMAT_VERSION);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn f32s(&mut self, v: &[f32]) {
        self.u32(v.len() as u32);
        for x in v {
            self.f32(*x);
        }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.buf.extend_from_slice(b);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Check magic and version and position the reader after the header.
    pub fn new(data: &'a [u8], magic: &[u8; 4]) -> Result<Self, FormatError> {
        let mut r = Reader { data, pos: 0 };
        if r.take(4)? != magic {
            return Err(FormatError::BadMagic);
        }
        let found = r.u32()?;
        if found != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion {
                expected: FORMAT_VERSION,
                found,
            });
        }
        Ok(r)
    }

    /// Reader over a headerless nested blob.
    pub fn body(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).ok_or(FormatError::Truncated)?;
        let slice = self.data.get(self.pos..end).ok_or(FormatError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        let mut a = [0u8; 8];
        a.copy_from_slice(self.take(8)?);
        Ok(u64::from_le_bytes(a))
    }

    pub fn f32(&mut self) -> Result<f32, FormatError> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        let mut a = [0u8; 8];
        a.copy_from_slice(self.take(8)?);
        Ok(f64::from_le_bytes(a))
    }

    pub fn usize(&mut self) -> Result<usize, FormatError> {
        Ok(self.u32()? as usize)
    }

    pub fn str(&mut self) -> Result<String, FormatError> {
        let n = self.usize()?;
        let b = self.take(n)?;
        core::str::from_utf8(b)
            .map(String::from)
            .map_err(|_| FormatError::Invalid("string is not UTF-8".into()))
    }

    pub fn f32s(&mut self) -> Result<Vec<f32>, FormatError> {
        let n = self.usize()?;
        let b = self.take(n.checked_mul(4).ok_or(FormatError::Truncated)?)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    /// Like [`Reader::f32s`] but the blob must have exactly `len` entries.
    pub fn f32s_exact(&mut self, len: usize, what: &str) -> Result<Vec<f32>, FormatError> {
        let v = self.f32s()?;
        if v.len() != len {
            return Err(FormatError::Invalid(alloc::format!(
                "{what}: expected {len} weights, found {}",
                v.len()
            )));
        }
        Ok(v)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], FormatError> {
        let n = self.usize()?;
        self.take(n)
    }

    pub fn finish(self) -> Result<(), FormatError> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err(FormatError::Invalid("trailing bytes".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_checked() {
        let bytes = Writer::new(b"TEST").finish();
        assert!(Reader::new(&bytes, b"TEST").is_ok());
        assert_eq!(Reader::new(&bytes, b"NOPE").unwrap_err(), FormatError::BadMagic);
        let mut other = bytes.clone();
        other[4] = 9;
        assert!(matches!(
            Reader::new(&other, b"TEST"),
            Err(FormatError::UnsupportedVersion { found: 9, .. })
        ));
        assert_eq!(Reader::new(&bytes[..6], b"TEST").unwrap_err(), FormatError::Truncated);
    }

    #[test]
    fn truncated_blob_is_an_error() {
        let mut w = Writer::new(b"TEST");
        w.f32s(&[1.0, 2.0, 3.0]);
        let bytes = w.finish();
        let mut r = Reader::new(&bytes[..bytes.len() - 2], b"TEST").unwrap();
        assert_eq!(r.f32s().unwrap_err(), FormatError::Truncated);
    }
}
