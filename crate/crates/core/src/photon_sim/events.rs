//! Sparse photon-event records and the `PHE1` event file.
//!
//! `PHE1` layout (little endian): magic, u32 width, u32 height,
//! u32 t_bin_max, u64 event count, then `(u16 x, u16 y, u32 bin)` records.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::condition::SimulationCondition;
use crate::error::{Error, Result};
use crate::raster::{read_exact, read_u32};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhotonEvent {
    pub x: u16,
    pub y: u16,
    pub bin: u32,
}

/// Photon detections of one acquisition, in canonical order: pixels
/// row-major, bins ascending within a pixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonEvents {
    width: usize,
    height: usize,
    events: Vec<PhotonEvent>,
    condition: SimulationCondition,
}

/// Dense photon-count tensor `n[y][x][t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub width: usize,
    pub height: usize,
    pub n_bins: usize,
    pub counts: Vec<u32>,
}

impl Histogram {
    pub fn get(&self, x: usize, y: usize, t: usize) -> u32 {
        self.counts[(y * self.width + x) * self.n_bins + t]
    }
}

impl PhotonEvents {
    /// Validates bounds and sorts into canonical order.
    pub fn new(
        width: usize,
        height: usize,
        mut events: Vec<PhotonEvent>,
        condition: SimulationCondition,
    ) -> Result<Self> {
        if width > u16::MAX as usize + 1 || height > u16::MAX as usize + 1 {
            return Err(Error::Format("event raster wider than u16 range".into()));
        }
        for e in &events {
            if e.x as usize >= width || e.y as usize >= height || e.bin > condition.t_bin_max {
                return Err(Error::Format(format!("event {e:?} out of bounds")));
            }
        }
        events.sort_unstable_by_key(|e| (e.y, e.x, e.bin));
        Ok(Self {
            width,
            height,
            events,
            condition,
        })
    }

    pub(crate) fn from_sorted(
        width: usize,
        height: usize,
        events: Vec<PhotonEvent>,
        condition: SimulationCondition,
    ) -> Self {
        debug_assert!(events.windows(2).all(|w| (w[0].y, w[0].x, w[0].bin) <= (w[1].y, w[1].x, w[1].bin)));
        Self {
            width,
            height,
            events,
            condition,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn events(&self) -> &[PhotonEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn condition(&self) -> &SimulationCondition {
        &self.condition
    }

    /// Bins of each pixel, indexed row-major.
    pub fn per_pixel(&self) -> Vec<&[PhotonEvent]> {
        let mut out = vec![&self.events[..0]; self.width * self.height];
        let mut start = 0;
        while start < self.events.len() {
            let e = self.events[start];
            let mut end = start + 1;
            while end < self.events.len() && self.events[end].x == e.x && self.events[end].y == e.y {
                end += 1;
            }
            out[e.y as usize * self.width + e.x as usize] = &self.events[start..end];
            start = end;
        }
        out
    }

    /// Number of photons per pixel.
    pub fn counts_per_pixel(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.width * self.height];
        for e in &self.events {
            counts[e.y as usize * self.width + e.x as usize] += 1;
        }
        counts
    }

    pub fn to_histogram(&self) -> Histogram {
        let n_bins = self.condition.n_bins();
        let mut counts = vec![0u32; self.width * self.height * n_bins];
        for e in &self.events {
            counts[(e.y as usize * self.width + e.x as usize) * n_bins + e.bin as usize] += 1;
        }
        Histogram {
            width: self.width,
            height: self.height,
            n_bins,
            counts,
        }
    }

    pub fn from_histogram(hist: &Histogram, condition: SimulationCondition) -> Result<Self> {
        if hist.n_bins != condition.n_bins() {
            return Err(Error::Format("histogram depth does not match t_bin_max".into()));
        }
        let mut events = Vec::new();
        for y in 0..hist.height {
            for x in 0..hist.width {
                for t in 0..hist.n_bins {
                    for _ in 0..hist.get(x, y, t) {
                        events.push(PhotonEvent {
                            x: x as u16,
                            y: y as u16,
                            bin: t as u32,
                        });
                    }
                }
            }
        }
        Self::new(hist.width, hist.height, events, condition)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(24 + 8 * self.events.len());
        buf.extend_from_slice(b"PHE1");
        buf.extend_from_slice(&(self.width as u32).to_le_bytes());
        buf.extend_from_slice(&(self.height as u32).to_le_bytes());
        buf.extend_from_slice(&self.condition.t_bin_max.to_le_bytes());
        buf.extend_from_slice(&(self.events.len() as u64).to_le_bytes());
        for e in &self.events {
            buf.extend_from_slice(&e.x.to_le_bytes());
            buf.extend_from_slice(&e.y.to_le_bytes());
            buf.extend_from_slice(&e.bin.to_le_bytes());
        }
        buf
    }

    /// Decodes a `PHE1` buffer. The file only records `t_bin_max`, so the
    /// remaining acquisition parameters come from `condition`, which must agree.
    pub fn decode(mut bytes: &[u8], condition: SimulationCondition) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut bytes, &mut magic)?;
        if &magic != b"PHE1" {
            return Err(Error::Format("missing PHE1 magic".into()));
        }
        let width = read_u32(&mut bytes)? as usize;
        let height = read_u32(&mut bytes)? as usize;
        let t_bin_max = read_u32(&mut bytes)?;
        if t_bin_max != condition.t_bin_max {
            return Err(Error::Format(format!(
                "file t_bin_max {t_bin_max} differs from condition {}",
                condition.t_bin_max
            )));
        }
        let mut n = [0u8; 8];
        read_exact(&mut bytes, &mut n)?;
        let n = u64::from_le_bytes(n) as usize;
        if bytes.len() != n.saturating_mul(8) {
            return Err(Error::Format(format!("expected {n} records")));
        }
        let events = bytes
            .chunks_exact(8)
            .map(|r| PhotonEvent {
                x: u16::from_le_bytes([r[0], r[1]]),
                y: u16::from_le_bytes([r[2], r[3]]),
                bin: u32::from_le_bytes([r[4], r[5], r[6], r[7]]),
            })
            .collect();
        Self::new(width, height, events, condition)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, condition: SimulationCondition) -> Result<Self> {
        Self::decode(&fs::read(path)?, condition)
    }
}
