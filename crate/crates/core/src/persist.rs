//! Checksummed binary container shared by demo datasets and checkpoints.
//!
//! ```text
//! magic       8 bytes
//! header_len  u32 LE
//! header      header_len bytes of JSON
//! repeated:
//!   record_len  u32 LE
//!   record      record_len bytes
//! end marker  u32 LE 0xFFFF_FFFF
//! checksum    32 bytes, SHA-256 of everything above
//! ```
//!
//! The structure is parsed before the checksum is verified, so a short file
//! reports `Truncated` while an intact-but-altered file reports
//! `ChecksumMismatch`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

const END_MARKER: u32 = u32::MAX;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("not a {expected} file (bad magic bytes)")]
    BadMagic { expected: &'static str },
    #[error("file truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("checksum mismatch: file is corrupt")]
    ChecksumMismatch,
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("malformed record: {0}")]
    Malformed(String),
}

impl PersistError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        PersistError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub struct ContainerWriter {
    buf: Vec<u8>,
}

impl ContainerWriter {
    pub fn new(magic: &[u8; 8], header_json: &[u8]) -> Self {
        let mut buf = Vec::with_capacity(64 + header_json.len());
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
        buf.extend_from_slice(header_json);
        Self { buf }
    }

    pub fn record(&mut self, bytes: &[u8]) {
        assert!(bytes.len() < END_MARKER as usize, "record too large");
        self.buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
        self.buf.extend_from_slice(bytes);
    }

    pub fn finish(mut self) -> Vec<u8> {
        self.buf.extend_from_slice(&END_MARKER.to_le_bytes());
        let digest = Sha256::digest(&self.buf);
        self.buf.extend_from_slice(&digest);
        self.buf
    }
}

#[derive(Debug)]
pub struct Container<'a> {
    pub header: &'a [u8],
    pub records: Vec<&'a [u8]>,
}

pub fn read_container<'a>(
    bytes: &'a [u8],
    magic: &[u8; 8],
    kind: &'static str,
) -> Result<Container<'a>, PersistError> {
    let mut cursor = Cursor { bytes, offset: 0 };
    if bytes.len() >= magic.len() && &bytes[..magic.len()] != magic {
        return Err(PersistError::BadMagic { expected: kind });
    }
    cursor.take(magic.len())?;
    let header_len = cursor.u32()? as usize;
    let header = cursor.take(header_len)?;
    let mut records = Vec::new();
    loop {
        let len = cursor.u32()?;
        if len == END_MARKER {
            break;
        }
        records.push(cursor.take(len as usize)?);
    }
    let body_end = cursor.offset;
    let stored = cursor.take(CHECKSUM_LEN)?;
    if cursor.offset != bytes.len() {
        return Err(PersistError::Malformed(format!(
            "{} trailing bytes after checksum",
            bytes.len() - cursor.offset
        )));
    }
    if Sha256::digest(&bytes[..body_end]).as_slice() != stored {
        return Err(PersistError::ChecksumMismatch);
    }
    Ok(Container { header, records })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        let available = self.bytes.len() - self.offset;
        if n > available {
            return Err(PersistError::Truncated {
                offset: self.offset,
                needed: n - available,
            });
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Little-endian field reader for record payloads.
pub struct RecordReader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> RecordReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, offset: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        if self.offset + n > self.bytes.len() {
            return Err(PersistError::Malformed(format!(
                "record ends at {} but {} more bytes were expected",
                self.bytes.len(),
                self.offset + n - self.bytes.len()
            )));
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, PersistError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, PersistError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, PersistError> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(self) -> Result<(), PersistError> {
        if self.offset == self.bytes.len() {
            Ok(())
        } else {
            Err(PersistError::Malformed(format!(
                "{} unread bytes in record",
                self.bytes.len() - self.offset
            )))
        }
    }
}

pub fn put_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), PersistError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| PersistError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| PersistError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| PersistError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| PersistError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| PersistError::io(path, e.error))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, PersistError> {
    fs::read(path).map_err(|e| PersistError::io(path, e))
}
