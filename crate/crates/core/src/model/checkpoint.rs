//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic      8 bytes  "SIDDACKP"
//! version    u32      1
//! num_nodes  u64
//! dim        u64
//! factors    u64
//! seed       u64
//! count      u32      number of tensors
//! per tensor:
//!   name_len u32, name (UTF-8), rows u64, cols u64, rows*cols f64
//! ```
//!
//! Values are stored as raw IEEE-754 bits, so a round trip is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::{ModelParams, TENSOR_NAMES};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAGIC: &[u8; 8] = b"SIDDACKP";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(params: &ModelParams, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [params.num_nodes(), params.dim(), params.factors()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&params.seed().to_le_bytes())?;
    let tensors = params.weights.as_array();
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, p) in TENSOR_NAMES.iter().zip(tensors) {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(p.value.rows() as u64).to_le_bytes())?;
        w.write_all(&(p.value.cols() as u64).to_le_bytes())?;
        for v in p.value.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_usize<R: Read>(r: &mut R) -> Result<usize> {
    usize::try_from(read_u64(r)?).map_err(|_| Error::Checkpoint("size overflows usize".into()))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ModelParams> {
    if &read_array::<8, _>(&mut r)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let num_nodes = read_usize(&mut r)?;
    let dim = read_usize(&mut r)?;
    let factors = read_usize(&mut r)?;
    let seed = read_u64(&mut r)?;
    let count = read_u32(&mut r)? as usize;
    if count != TENSOR_NAMES.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {count}",
            TENSOR_NAMES.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for expected in TENSOR_NAMES {
        let len = read_u32(&mut r)? as usize;
        if len > 256 {
            return Err(Error::Checkpoint(format!("implausible tensor name length {len}")));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        if name != expected.as_bytes() {
            return Err(Error::Checkpoint(format!(
                "expected tensor `{expected}`, found `{}`",
                String::from_utf8_lossy(&name)
            )));
        }
        let rows = read_usize(&mut r)?;
        let cols = read_usize(&mut r)?;
        let total = rows
            .checked_mul(cols)
            .filter(|&t| t <= 1 << 32)
            .ok_or_else(|| Error::Checkpoint(format!("implausible shape {rows}x{cols}")))?;
        let values = (0..total)
            .map(|_| read_array::<8, _>(&mut r).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        tensors.push(Matrix::from_vec(rows, cols, values)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    ModelParams::from_tensors(num_nodes, dim, factors, seed, tensors)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    write_checkpoint(params, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
