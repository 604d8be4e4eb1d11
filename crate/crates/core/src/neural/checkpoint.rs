//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "RMCK"
//! version  u32      1
//! count    u32      number of tensors that follow (3 x parameter tensors)
//! adam_t   u64      optimizer step counter
//! tensor*  ndims u32, dims u32 x ndims, values f32 x prod(dims)
//! ```
//!
//! Tensors appear in layout order three times: parameters, first moments,
//! second moments.

use std::io::{Read, Write};
use std::path::Path;

use super::{Adam, AdamConfig, ArchConfig, NetworkParams};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(out: &mut W, params: &NetworkParams, adam: &Adam) -> Result<()> {
    let layout = params.layout();
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&((layout.tensors.len() * 3) as u32).to_le_bytes())?;
    out.write_all(&adam.t.to_le_bytes())?;
    for store in [&params.values, &adam.m, &adam.v] {
        for spec in &layout.tensors {
            out.write_all(&(spec.shape.len() as u32).to_le_bytes())?;
            for &d in &spec.shape {
                out.write_all(&(d as u32).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(spec.len() * 4);
            for &v in &store[spec.range()] {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
            out.write_all(&buf)?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a checkpoint, requiring every tensor shape to match `arch`.
pub fn read_checkpoint<R: Read>(input: &mut R, arch: &ArchConfig, adam_cfg: AdamConfig) -> Result<(NetworkParams, Adam)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(input)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut params = NetworkParams::zeros(arch)?;
    let layout = params.layout().clone();
    let count = read_u32(input)? as usize;
    if count != layout.tensors.len() * 3 {
        return Err(Error::Checkpoint(format!(
            "architecture mismatch: file has {count} tensors, config expects {}",
            layout.tensors.len() * 3
        )));
    }
    let mut t = [0u8; 8];
    input.read_exact(&mut t).map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    let mut adam = Adam::new(layout.total, adam_cfg);
    adam.t = u64::from_le_bytes(t);
    for which in 0..3 {
        for spec in &layout.tensors {
            let ndims = read_u32(input)? as usize;
            let mut dims = Vec::with_capacity(ndims);
            for _ in 0..ndims.min(8) {
                dims.push(read_u32(input)? as usize);
            }
            if dims != spec.shape {
                return Err(Error::Checkpoint(format!(
                    "architecture mismatch for {}: file {:?}, config {:?}",
                    spec.name, dims, spec.shape
                )));
            }
            let mut buf = vec![0u8; spec.len() * 4];
            input.read_exact(&mut buf).map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
            let store = match which {
                0 => &mut params.values,
                1 => &mut adam.m,
                _ => &mut adam.v,
            };
            for (dst, chunk) in store[spec.range()].iter_mut().zip(buf.chunks_exact(4)) {
                *dst = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
            }
        }
    }
    let mut extra = [0u8; 1];
    if input.read(&mut extra)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    params.check_finite()?;
    Ok((params, adam))
}

pub fn save_checkpoint(path: &Path, params: &NetworkParams, adam: &Adam) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, params, adam)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, arch: &ArchConfig, adam_cfg: AdamConfig) -> Result<(NetworkParams, Adam)> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(&mut bytes.as_slice(), arch, adam_cfg)
}
