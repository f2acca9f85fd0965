//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "SLRKCKPT"
//! version u32      currently 1
//! count   u32      number of parameters
//! then, per parameter in registration order:
//!   name_len u32, name bytes (UTF-8), rows u32, cols u32,
//!   rows*cols values as f64 little-endian
//! ```
//!
//! Values are always stored as `f64`; an `f32` run widens losslessly on
//! save and rounds on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::tensor::{ParamSet, Tensor};
use crate::Real;

const MAGIC: &[u8; 8] = b"SLRKCKPT";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint does not match model: {0}")]
    Mismatch(String),
}

/// Writes every parameter of `params` to `path`.
pub fn save_checkpoint<F: Real>(params: &ParamSet<F>, path: &Path) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (_, p) in params.iter() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(p.value.rows() as u32).to_le_bytes())?;
        w.write_all(&(p.value.cols() as u32).to_le_bytes())?;
        for x in p.value.data() {
            w.write_all(&x.to_f64().unwrap().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint as raw name/tensor pairs.
pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Tensor<f64>)>, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = read_u32(&mut r)? as usize;

    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        if name_len > 4096 {
            return Err(CheckpointError::Corrupt(format!(
                "parameter name length {name_len} is implausible"
            )));
        }
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| CheckpointError::Corrupt("parameter name is not UTF-8".into()))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        out.push((name, Tensor::from_vec(rows, cols, data)));
    }
    Ok(out)
}

/// Loads a checkpoint into an existing parameter set; every stored name must
/// match a registered parameter of the same shape (extra or missing names
/// are errors, so a checkpoint can only restore the model it came from).
pub fn load_checkpoint_into<F: Real>(
    path: &Path,
    params: &mut ParamSet<F>,
) -> Result<(), CheckpointError> {
    let stored = load_checkpoint(path)?;
    if stored.len() != params.len() {
        return Err(CheckpointError::Mismatch(format!(
            "checkpoint has {} parameters, model has {}",
            stored.len(),
            params.len()
        )));
    }
    for (name, tensor) in stored {
        let id = params.find(&name).ok_or_else(|| {
            CheckpointError::Mismatch(format!("checkpoint parameter {name:?} not in model"))
        })?;
        let target = params.get_mut(id);
        if target.value.shape() != tensor.shape() {
            return Err(CheckpointError::Mismatch(format!(
                "parameter {name:?}: checkpoint shape {:?} vs model shape {:?}",
                tensor.shape(),
                target.value.shape()
            )));
        }
        target.value = tensor.to_real::<F>();
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
