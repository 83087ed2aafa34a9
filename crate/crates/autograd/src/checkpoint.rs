//! Self-describing binary checkpoint.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    4 bytes  b"MPCK"
//! version  u32      CHECKPOINT_VERSION
//! count    u32      number of tensors
//! per tensor:
//!   name_len  u32, name  UTF-8 bytes
//!   dtype     u8   (0 = f64, 1 = f32)
//!   ndim      u32, dims  ndim x u64
//!   payload   prod(dims) values, little-endian, in the given dtype
//! ```

use std::io::{Read, Write};

use crate::error::{Result, TensorError};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"MPCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F64,
    F32,
}

impl DType {
    fn tag(self) -> u8 {
        match self {
            DType::F64 => 0,
            DType::F32 => 1,
        }
    }
}

/// Writes every parameter value in store order.
pub fn write_checkpoint<W: Write>(w: &mut W, params: &ParamStore, dtype: DType) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (_, p) in params.iter() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&[dtype.tag()])?;
        let shape = p.value.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in p.value.data() {
            match dtype {
                DType::F64 => w.write_all(&v.to_le_bytes())?,
                DType::F32 => w.write_all(&(v as f32).to_le_bytes())?,
            }
        }
    }
    Ok(())
}

/// Reads all tensors as `(name, tensor)` pairs in file order.
pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TensorError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(TensorError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(r)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| TensorError::Checkpoint("tensor name is not UTF-8".into()))?;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let ndim = read_u32(r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        match tag[0] {
            0 => {
                for _ in 0..n {
                    let mut b = [0u8; 8];
                    r.read_exact(&mut b)?;
                    data.push(f64::from_le_bytes(b));
                }
            }
            1 => {
                for _ in 0..n {
                    let mut b = [0u8; 4];
                    r.read_exact(&mut b)?;
                    data.push(f32::from_le_bytes(b) as f64);
                }
            }
            t => return Err(TensorError::Checkpoint(format!("unknown dtype tag {t}"))),
        }
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

/// Overwrites matching parameters in `params`; every stored parameter must be present with the same shape.
pub fn load_into<R: Read>(r: &mut R, params: &mut ParamStore) -> Result<()> {
    let tensors = read_checkpoint(r)?;
    for (name, t) in tensors {
        let id = params.id(&name)?;
        let p = params.get_mut(id);
        if p.value.shape() != t.shape() {
            return Err(TensorError::Checkpoint(format!(
                "shape of `{name}`: stored {:?}, expected {:?}",
                t.shape(),
                p.value.shape()
            )));
        }
        p.value = t;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
