//! Binary column dump of a path batch.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `RDPB` |
//! | 4 | format version, `u32` |
//! | 8 | paths `M`, `u64` |
//! | 8 | steps `N`, `u64` |
//! | 8 | dimension `d`, `u64` |
//! | 8 M (N + 1) d | values as `f64`, path-major, then time, then coordinate |
use std::io::{Read, Write};

use super::paths::PathBatch;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RDPB";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DumpedBatch {
    pub paths: usize,
    pub steps: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

pub fn write_batch<W: Write>(batch: &PathBatch, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for n in [batch.paths, batch.steps, batch.dim] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(batch.values().len() * 8);
    for v in batch.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_batch<R: Read>(mut r: R) -> Result<DumpedBatch> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::invalid("not a path batch dump (bad magic)"));
    }
    let mut v4 = [0u8; 4];
    r.read_exact(&mut v4)?;
    let version = u32::from_le_bytes(v4);
    if version != VERSION {
        return Err(Error::invalid(format!("unsupported dump version {version}")));
    }
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        *d = usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::invalid("dump size overflows usize"))?;
    }
    let [paths, steps, dim] = dims;
    let count = paths
        .checked_mul(steps + 1)
        .and_then(|v| v.checked_mul(dim))
        .ok_or_else(|| Error::invalid("dump size overflows usize"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::invalid(format!("dump holds {} bytes of values, expected {}", bytes.len(), count * 8)));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DumpedBatch { paths, steps, dim, values })
}
