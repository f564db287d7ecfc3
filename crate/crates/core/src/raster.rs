//! Row-major 2-D rasters and the `DPH1` / `RFL1` binary raster files.
//!
//! Layout: 4 magic bytes, u32 LE width, u32 LE height, then width*height
//! f32 LE values in row-major order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                got: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: self.dims(),
            });
        }
        Ok(())
    }
}

impl Raster<f64> {
    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Magic tag of a raster file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RasterKind {
    Depth,
    Reflectance,
}

impl RasterKind {
    pub fn magic(self) -> &'static [u8; 4] {
        match self {
            RasterKind::Depth => b"DPH1",
            RasterKind::Reflectance => b"RFL1",
        }
    }
}

pub fn encode_raster(kind: RasterKind, raster: &Raster<f64>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(12 + 4 * raster.len());
    buf.extend_from_slice(kind.magic());
    buf.extend_from_slice(&(raster.width() as u32).to_le_bytes());
    buf.extend_from_slice(&(raster.height() as u32).to_le_bytes());
    for &v in raster.as_slice() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    buf
}

pub fn decode_raster(kind: RasterKind, mut bytes: &[u8]) -> Result<Raster<f64>> {
    let mut magic = [0u8; 4];
    read_exact(&mut bytes, &mut magic)?;
    if &magic != kind.magic() {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(kind.magic()),
            String::from_utf8_lossy(&magic)
        )));
    }
    let width = read_u32(&mut bytes)? as usize;
    let height = read_u32(&mut bytes)? as usize;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("raster too large".into()))?;
    if bytes.len() != 4 * n {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            4 * n,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Raster::from_vec(width, height, data)
}

pub fn write_raster(path: impl AsRef<Path>, kind: RasterKind, raster: &Raster<f64>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_raster(kind, raster))?;
    Ok(())
}

pub fn read_raster(path: impl AsRef<Path>, kind: RasterKind) -> Result<Raster<f64>> {
    let bytes = fs::read(path)?;
    decode_raster(kind, &bytes)
}

pub(crate) fn read_exact(src: &mut &[u8], out: &mut [u8]) -> Result<()> {
    src.read_exact(out)
        .map_err(|_| Error::Format("truncated file".into()))
}

pub(crate) fn read_u32(src: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(src, &mut b)?;
    Ok(u32::from_le_bytes(b))
}
