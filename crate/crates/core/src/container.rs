//! Shared on-disk container used for patch libraries, cluster models and
//! component dumps.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"PMOSAIC\0"
//! 8       8     u64    header length H
//! 16      H     UTF-8 JSON header (compact, field order fixed by the writer)
//! 16+H    8     u64    payload length P
//! 24+H    P     binary payload, layout defined by the header's `kind`
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PMOSAIC\0";

/// Serializes a container into memory.
pub fn encode<H: Serialize>(header: &H, payload: &[u8]) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("container headers are plain data");
    let mut out = Vec::with_capacity(24 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn write<H: Serialize>(path: &Path, header: &H, payload: &[u8]) -> Result<()> {
    let bytes = encode(header, payload);
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read<H: DeserializeOwned>(path: &Path) -> Result<(H, Vec<u8>)> {
    let mut reader = crate::image_io::open_buffered(path)?;
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn decode<H: DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<(H, Vec<u8>)> {
    let mut pos = 0usize;
    let mut take = |len: usize| -> Result<&[u8]> {
        let end = pos
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::corrupt(path, "container truncated"))?;
        let slice = &bytes[pos..end];
        pos = end;
        Ok(slice)
    };
    if take(8)? != MAGIC {
        return Err(Error::corrupt(path, "not a patchmosaic container"));
    }
    let header_len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let header: H = serde_json::from_slice(take(header_len)?)
        .map_err(|e| Error::corrupt(path, format!("bad header: {e}")))?;
    let payload_len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let payload = take(payload_len)?.to_vec();
    Ok((header, payload))
}

/// Little-endian cursor over a container payload.
pub(crate) struct PayloadReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> PayloadReader<'a> {
    pub fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Self {
            bytes,
            pos: 0,
            path,
        }
    }

    pub fn bytes(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::corrupt(self.path, "payload truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::corrupt(self.path, "trailing bytes in payload"));
        }
        Ok(())
    }
}
