//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   "AWEP" (4 bytes)
//! u32     container version (1)
//! u32     descriptor length, then that many bytes of descriptor JSON
//! u32     tensor count
//! tensor: u16 name length, name (UTF-8)
//!         u8 rank, rank x u32 dims
//!         product(dims) x f32 data
//! ```
//!
//! Tensor data is stored in 32-bit precision regardless of the in-memory
//! precision; a 32-bit model round-trips bit-exactly.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::real::Real;
use super::rnn::{ArchDescriptor, ModelParameters};
use super::tape::{GradError, ParamSet};
use super::tensor::Tensor;

const MAGIC: &[u8; 4] = b"AWEP";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("descriptor error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Model(#[from] GradError),
}

pub fn save_checkpoint<P: Real>(
    path: &Path,
    model: &ModelParameters<P>,
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let desc = serde_json::to_vec(&model.arch)?;
    w.write_all(&(desc.len() as u32).to_le_bytes())?;
    w.write_all(&desc)?;
    w.write_all(&(model.params.len() as u32).to_le_bytes())?;
    for (name, tensor) in model.params.iter() {
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&[tensor.shape().len() as u8])?;
        for &d in tensor.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in tensor.data() {
            w.write_all(&v.as_f32().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<P: Real>(path: &Path) -> Result<ModelParameters<P>, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let desc_len = read_u32(&mut r)? as usize;
    let mut desc = vec![0u8; desc_len];
    r.read_exact(&mut desc)?;
    let arch: ArchDescriptor = serde_json::from_slice(&desc)?;
    let n_tensors = read_u32(&mut r)? as usize;
    let mut params = ParamSet::new();
    for _ in 0..n_tensors {
        let name_len = read_u16(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| CheckpointError::Corrupt("tensor name is not UTF-8".into()))?;
        let mut rank = [0u8; 1];
        r.read_exact(&mut rank)?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            shape.push(read_u32(&mut r)? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut buf = [0u8; 4];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            data.push(P::from_f32(f32::from_le_bytes(buf)));
        }
        params.add(&name, Tensor::new(shape, data))?;
    }
    Ok(ModelParameters::from_parts(arch, params)?)
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u16(r: &mut impl Read) -> io::Result<u16> {
    let mut buf = [0u8; 2];
    r.read_exact(&mut buf)?;
    Ok(u16::from_le_bytes(buf))
}
