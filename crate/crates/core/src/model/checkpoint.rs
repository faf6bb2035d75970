//! Checkpoint file: little-endian binary. Layout:
//!   magic "AUGU1" | 12 config u32s | parameters in declaration order as
//!   raw f32 | CRC32 over everything before the trailer.

use std::io::{Read, Write};
use std::path::Path;

use crate::checksum::crc32;
use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::unity::UnityModel;
use crate::numerics::{ParamSet, Tensor};

const MAGIC: &[u8; 5] = b"AUGU1";

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Serialize to bytes (exposed for bit-identity tests).
pub fn checkpoint_bytes(model: &UnityModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    for v in model.config.to_ints() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for (_, tensor) in model.params.iter() {
        for &v in &tensor.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn save_checkpoint(model: &UnityModel, path: &Path) -> Result<()> {
    let bytes = checkpoint_bytes(model);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Load a checkpoint; when `expected` is given, any config difference is
/// rejected before parameters are read.
pub fn load_checkpoint(path: &Path, expected: Option<&ModelConfig>) -> Result<UnityModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < MAGIC.len() + 12 * 4 + 4 {
        return Err(format_err(path, "file too short"));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(format_err(path, "bad magic (not a checkpoint)"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    let actual_crc = crc32(body);
    if stored_crc != actual_crc {
        return Err(format_err(
            path,
            format!("CRC mismatch: stored {stored_crc:08x}, computed {actual_crc:08x}"),
        ));
    }

    let mut off = MAGIC.len();
    let mut ints = [0u32; 12];
    for v in ints.iter_mut() {
        *v = u32::from_le_bytes(body[off..off + 4].try_into().expect("4 bytes"));
        off += 4;
    }
    let config = ModelConfig::from_ints(&ints);
    config.validate().map_err(|e| format_err(path, e.to_string()))?;
    if let Some(exp) = expected {
        if *exp != config {
            return Err(Error::Config(format!(
                "checkpoint config does not match requested profile ({:?} vs {:?})",
                config.to_ints(),
                exp.to_ints()
            )));
        }
    }

    // Reconstruct the declaration-order layout to know tensor shapes.
    let template = UnityModel::new(config.clone(), 0)?;
    let mut params = ParamSet::new();
    for (name, tensor) in template.params.iter() {
        let n = tensor.numel();
        if off + 4 * n > body.len() {
            return Err(format_err(path, format!("truncated at parameter {name}")));
        }
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let b = &body[off + 4 * i..off + 4 * i + 4];
            data.push(f32::from_le_bytes(b.try_into().expect("4 bytes")));
        }
        off += 4 * n;
        params.push(
            name,
            Tensor::new(tensor.shape.clone(), data).map_err(|e| format_err(path, e.to_string()))?,
        );
    }
    if off != body.len() {
        return Err(format_err(path, "trailing bytes after parameters"));
    }
    UnityModel::from_params(config, params)
}
