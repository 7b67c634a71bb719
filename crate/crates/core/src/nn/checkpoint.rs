//! Checkpoint layout: one JSON header line, then for each tensor
//! `u32 name length, name, u32 rank, u64 dims..., f64 values...`, all
//! little-endian.

use std::io::{Cursor, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::params::{BiLstmParams, ModelConfig, TENSOR_NAMES};
use super::tensor::Tensor;

const FORMAT: &str = "logvec-ckpt-v1";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    config: ModelConfig,
    #[serde(default)]
    meta: serde_json::Value,
    tensors: usize,
}

pub fn encode_checkpoint(
    params: &BiLstmParams,
    config: &ModelConfig,
    meta: &serde_json::Value,
) -> Result<Vec<u8>> {
    params.check_shapes(config)?;
    let header = Header {
        format: FORMAT.into(),
        config: config.clone(),
        meta: meta.clone(),
        tensors: TENSOR_NAMES.len(),
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| Error::format(e.to_string()))?;
    out.push(b'\n');
    for (name, t) in params.named_tensors() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &dim in t.shape() {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(
    params: &BiLstmParams,
    config: &ModelConfig,
    meta: &serde_json::Value,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(params, config, meta)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_u32(r: &mut Cursor<&[u8]>) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::format("truncated checkpoint"))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut Cursor<&[u8]>) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::format("truncated checkpoint"))?;
    Ok(u64::from_le_bytes(b))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelConfig, BiLstmParams, serde_json::Value)> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format("checkpoint header missing"))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::format(format!("bad checkpoint header: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::format(format!(
            "unsupported checkpoint format {:?}",
            header.format
        )));
    }
    if header.tensors != TENSOR_NAMES.len() {
        return Err(Error::format(format!(
            "expected {} tensors, header says {}",
            TENSOR_NAMES.len(),
            header.tensors
        )));
    }
    header
        .config
        .validate()
        .map_err(|e| Error::format(e.to_string()))?;

    let mut params = BiLstmParams::zeros(&header.config);
    let mut r = Cursor::new(&bytes[newline + 1..]);
    for (expected_name, slot) in TENSOR_NAMES.into_iter().zip(params.tensors_mut()) {
        let name_len = read_u32(&mut r)? as usize;
        if name_len > 256 {
            return Err(Error::format("tensor name too long"));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|_| Error::format("truncated checkpoint"))?;
        if name != expected_name.as_bytes() {
            return Err(Error::format(format!(
                "expected tensor {expected_name}, found {}",
                String::from_utf8_lossy(&name)
            )));
        }
        let rank = read_u32(&mut r)? as usize;
        let shape = (0..rank)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if shape != slot.shape() {
            return Err(Error::format(format!(
                "tensor {expected_name} has shape {shape:?}, config implies {:?}",
                slot.shape()
            )));
        }
        let data = (0..slot.len())
            .map(|_| read_u64(&mut r).map(f64::from_bits))
            .collect::<Result<Vec<_>>>()?;
        *slot = Tensor::new(shape, data).map_err(|e| Error::format(e.to_string()))?;
    }
    if (r.position() as usize) != bytes.len() - newline - 1 {
        return Err(Error::format("trailing bytes after last tensor"));
    }
    Ok((header.config, params, header.meta))
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
) -> Result<(ModelConfig, BiLstmParams, serde_json::Value)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Loads a checkpoint and insists that it was written for `expected`.
pub fn load_checkpoint_expecting(
    path: impl AsRef<Path>,
    expected: &ModelConfig,
) -> Result<BiLstmParams> {
    let (config, params, _) = load_checkpoint(path)?;
    if &config != expected {
        return Err(Error::format(format!(
            "checkpoint config {config:?} differs from {expected:?}"
        )));
    }
    Ok(params)
}
