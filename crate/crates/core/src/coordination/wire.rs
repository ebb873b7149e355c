//! Little-endian cursor helpers shared by the coordination payloads.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireError {
    Truncated,
    BadTag(u8),
    BadUtf8,
    TooLong,
    TrailingBytes(usize),
}

impl fmt::Display for WireError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WireError::Truncated => f.write_str("payload ends early"),
            WireError::BadTag(t) => write!(f, "unknown type tag {t}"),
            WireError::BadUtf8 => f.write_str("string is not valid UTF-8"),
            WireError::TooLong => f.write_str("field does not fit its length prefix"),
            WireError::TrailingBytes(n) => write!(f, "{n} unexpected bytes after payload"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for WireError {}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() < n {
            return Err(WireError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, WireError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn i64(&mut self) -> Result<i64, WireError> {
        let mut a = [0u8; 8];
        a.copy_from_slice(self.take(8)?);
        Ok(i64::from_le_bytes(a))
    }

    pub fn f64(&mut self) -> Result<f64, WireError> {
        let mut a = [0u8; 8];
        a.copy_from_slice(self.take(8)?);
        Ok(f64::from_le_bytes(a))
    }

    pub fn str8(&mut self) -> Result<String, WireError> {
        let n = usize::from(self.u8()?);
        self.utf8(n)
    }

    pub fn str16(&mut self) -> Result<String, WireError> {
        let n = usize::from(self.u16()?);
        self.utf8(n)
    }

    pub fn bytes16(&mut self) -> Result<Vec<u8>, WireError> {
        let n = usize::from(self.u16()?);
        Ok(self.take(n)?.to_vec())
    }

    fn utf8(&mut self, n: usize) -> Result<String, WireError> {
        let b = self.take(n)?;
        core::str::from_utf8(b)
            .map(String::from)
            .map_err(|_| WireError::BadUtf8)
    }

    pub fn finish(self) -> Result<(), WireError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(WireError::TrailingBytes(self.buf.len()))
        }
    }
}

pub(crate) fn put_str8(out: &mut Vec<u8>, s: &str) -> Result<(), WireError> {
    let n = u8::try_from(s.len()).map_err(|_| WireError::TooLong)?;
    out.push(n);
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

pub(crate) fn put_bytes16(out: &mut Vec<u8>, b: &[u8]) -> Result<(), WireError> {
    let n = u16::try_from(b.len()).map_err(|_| WireError::TooLong)?;
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(b);
    Ok(())
}
