//! Model file:
//!
//! ```text
//! "H2RM" | u32 version | u32 F | u32 G | u64 panel hash
//!        | u32 conv1 filters | u32 kernel | u32 conv2 | u32 conv3 | u32 activation
//!        | parameters as f64, in tensor order conv1_w, conv1_b, ..., out_w, out_b
//! ```
//!
//! All fields little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::model::{Activation, HeadShape, RegressorModel};
use super::{RegressorError, Result};
use crate::hash::Fnv1a;

pub const MODEL_MAGIC: &[u8; 4] = b"H2RM";
pub const MODEL_VERSION: u32 = 1;

fn u32_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| RegressorError::ShapeMismatch(format!("{n} exceeds u32")))
}

pub fn write_model<W: Write>(model: &RegressorModel, panel_hash: u64, mut w: W) -> Result<()> {
    let s = model.shape();
    let mut buf = Vec::with_capacity(48 + model.n_params() * 8);
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&u32_of(model.n_features())?.to_le_bytes());
    buf.extend_from_slice(&u32_of(model.n_genes())?.to_le_bytes());
    buf.extend_from_slice(&panel_hash.to_le_bytes());
    for n in [s.conv1_filters, s.kernel, s.conv2_channels, s.conv3_channels] {
        buf.extend_from_slice(&u32_of(n)?.to_le_bytes());
    }
    let act: u32 = match s.activation {
        Activation::Relu => 0,
        Activation::Identity => 1,
    };
    buf.extend_from_slice(&act.to_le_bytes());
    for p in model.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn take<const N: usize>(bytes: &[u8], pos: &mut usize) -> Result<[u8; N]> {
    let end = *pos + N;
    let slice = bytes
        .get(*pos..end)
        .ok_or_else(|| RegressorError::ShapeMismatch("model file truncated in header".into()))?;
    *pos = end;
    Ok(slice.try_into().expect("length checked"))
}

/// Reads a model; with `expected_panel` set, rejects a model trained on a
/// different panel. Returns the stored panel hash alongside the model.
pub fn read_model<R: Read>(mut r: R, expected_panel: Option<u64>) -> Result<(RegressorModel, u64)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let magic = take::<4>(&bytes, &mut pos)?;
    if &magic != MODEL_MAGIC {
        return Err(RegressorError::BadMagic(magic));
    }
    let u32_at = |pos: &mut usize| take::<4>(&bytes, pos).map(u32::from_le_bytes);
    let version = u32_at(&mut pos)?;
    if version != MODEL_VERSION {
        return Err(RegressorError::UnsupportedVersion(version));
    }
    let f = u32_at(&mut pos)? as usize;
    let g = u32_at(&mut pos)? as usize;
    let hash = u64::from_le_bytes(take::<8>(&bytes, &mut pos)?);
    if let Some(expected) = expected_panel {
        if expected != hash {
            return Err(RegressorError::PanelMismatch { expected: hash, found: expected });
        }
    }
    let c1 = u32_at(&mut pos)? as usize;
    let kernel = u32_at(&mut pos)? as usize;
    let c2 = u32_at(&mut pos)? as usize;
    let c3 = u32_at(&mut pos)? as usize;
    let activation = match u32_at(&mut pos)? {
        0 => Activation::Relu,
        1 => Activation::Identity,
        other => return Err(RegressorError::ShapeMismatch(format!("unknown activation code {other}"))),
    };
    let shape = HeadShape { conv1_filters: c1, kernel, conv2_channels: c2, conv3_channels: c3, activation };
    let rest = &bytes[pos..];
    if rest.len() % 8 != 0 {
        return Err(RegressorError::ShapeMismatch(format!("{} trailing parameter bytes", rest.len())));
    }
    let params: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let model = RegressorModel::from_params(f, g, shape, params)?;
    Ok((model, hash))
}

pub fn save_model(model: &RegressorModel, panel_hash: u64, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_model(model, panel_hash, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>, expected_panel: Option<u64>) -> Result<(RegressorModel, u64)> {
    read_model(std::fs::File::open(path)?, expected_panel)
}

/// FNV-1a over the serialized model bytes.
pub fn model_digest(model: &RegressorModel, panel_hash: u64) -> u64 {
    let mut buf = Vec::new();
    write_model(model, panel_hash, &mut buf).expect("in-memory write");
    let mut h = Fnv1a::new();
    h.write(&buf);
    h.finish()
}
