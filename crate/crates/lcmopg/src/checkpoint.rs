//! Versioned binary checkpoints for flat parameter buffers.
//!
//! A checkpoint stores the master seed, the iteration it was taken at, and
//! any number of named `f64` buffers (policy parameters, value-network
//! parameters, ...). Floats are written as little-endian IEEE-754 bits, so
//! a load reproduces the saved values bit for bit.
//!
//! Layout: magic `LCMC`, format version (u32), seed (u64), iteration
//! (u64), buffer count (u32), then per buffer a length-prefixed UTF-8 name
//! and a length-prefixed array of f64 bit patterns. All integers are
//! little-endian. Trailing bytes after the last buffer are an error.

use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"LCMC";
const VERSION: u32 = 1;

/// A named set of parameter buffers taken at a training iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub iteration: u64,
    pub buffers: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    /// The buffer stored under `name`, if present.
    pub fn buffer(&self, name: &str) -> Option<&[f64]> {
        self.buffers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }

    /// Serialize to the binary format.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.buffers.len() > u32::MAX as usize {
            return Err(Error::contract("too many buffers"));
        }
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.iteration.to_le_bytes());
        out.extend_from_slice(&(self.buffers.len() as u32).to_le_bytes());
        for (name, values) in &self.buffers {
            let name_bytes = name.as_bytes();
            if name_bytes.len() > u32::MAX as usize {
                return Err(Error::contract("buffer name too long"));
            }
            out.extend_from_slice(&(name_bytes.len() as u32).to_le_bytes());
            out.extend_from_slice(name_bytes);
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parse the binary format, rejecting wrong magic, unknown versions,
    /// truncation, and trailing garbage.
    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::Parse("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            )));
        }
        let seed = r.u64()?;
        let iteration = r.u64()?;
        let n_buffers = r.u32()? as usize;
        let mut buffers = Vec::with_capacity(n_buffers);
        for _ in 0..n_buffers {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Parse("buffer name is not UTF-8".into()))?
                .to_string();
            let len = r.u64()? as usize;
            let mut values = Vec::with_capacity(len);
            for _ in 0..len {
                values.push(f64::from_bits(r.u64()?));
            }
            buffers.push((name, values));
        }
        if r.pos != bytes.len() {
            return Err(Error::Parse(format!(
                "{} trailing bytes after the last buffer",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            seed,
            iteration,
            buffers,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        Checkpoint::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Parse("checkpoint file is truncated".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
