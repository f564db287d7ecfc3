//! `SPCM` model checkpoints.
//!
//! Layout (little endian): magic `SPCM`, u32 version, u32 width, u32 height,
//! u32 class count, u32 feature dim, f64 depth-normalization min, f64 max,
//! u64 parameter count, then the f32 parameters in network order (see
//! [`super::network`]).

use super::network::{Network, FEATURE_DIM};
use super::Classifier;
use crate::dataset::DepthRange;
use crate::error::{Error, Result};
use crate::raster::{read_exact, read_u32};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SPCM";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &Classifier) -> Vec<u8> {
    let cfg = model.config();
    let params = model.network().params();
    let mut buf = Vec::with_capacity(48 + 4 * params.len());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [
        CHECKPOINT_VERSION,
        cfg.width as u32,
        cfg.height as u32,
        cfg.class_count as u32,
        FEATURE_DIM as u32,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let norm = model.normalization();
    buf.extend_from_slice(&norm.min.to_le_bytes());
    buf.extend_from_slice(&norm.max.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    buf
}

pub fn decode_checkpoint(mut bytes: &[u8]) -> Result<Classifier> {
    let mut magic = [0u8; 4];
    read_exact(&mut bytes, &mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("missing SPCM magic".into()));
    }
    let version = read_u32(&mut bytes)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let width = read_u32(&mut bytes)? as usize;
    let height = read_u32(&mut bytes)? as usize;
    let classes = read_u32(&mut bytes)? as usize;
    if read_u32(&mut bytes)? as usize != FEATURE_DIM {
        return Err(Error::Format("feature dimension mismatch".into()));
    }
    let mut f = [0u8; 8];
    read_exact(&mut bytes, &mut f)?;
    let min = f64::from_le_bytes(f);
    read_exact(&mut bytes, &mut f)?;
    let max = f64::from_le_bytes(f);
    read_exact(&mut bytes, &mut f)?;
    let n = u64::from_le_bytes(f) as usize;
    if bytes.len() != 4 * n {
        return Err(Error::Format("parameter blob length mismatch".into()));
    }
    let params = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let net = Network::from_params(width, height, classes, params)
        .ok_or_else(|| Error::Format("parameter count does not match architecture".into()))?;
    Ok(Classifier::from_network(net, DepthRange { min, max }))
}
