//! Model checkpoint: the configuration followed by every parameter tensor.
//!
//! ```text
//! magic    4 bytes  b"MPCM"
//! version  u32      MODEL_CHECKPOINT_VERSION
//! cfg_len  u64, cfg  UTF-8 JSON of ModelConfig
//! tensors  molpc-autograd checkpoint stream
//! ```

use std::io::{Read, Write};
use std::path::Path;

use molpc_autograd::checkpoint::{load_into, write_checkpoint, DType};

use crate::config::ModelConfig;
use crate::error::ModelError;
use crate::model::Model;

pub const MODEL_MAGIC: &[u8; 4] = b"MPCM";
pub const MODEL_CHECKPOINT_VERSION: u32 = 1;

pub fn write_model<W: Write>(w: &mut W, model: &Model) -> Result<(), ModelError> {
    let cfg = serde_json::to_vec(&model.config).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(cfg.len() as u64).to_le_bytes())?;
    w.write_all(&cfg)?;
    write_checkpoint(w, &model.params, DType::F64)?;
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<Model, ModelError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(ModelError::Checkpoint("not a model checkpoint".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != MODEL_CHECKPOINT_VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let len = u64::from_le_bytes(b8) as usize;
    let mut cfg = vec![0u8; len];
    r.read_exact(&mut cfg)?;
    let config: ModelConfig = serde_json::from_slice(&cfg).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let mut model = Model::new(config, 0)?;
    load_into(r, &mut model.params)?;
    Ok(model)
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), ModelError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model, ModelError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_model(&mut r)
}
